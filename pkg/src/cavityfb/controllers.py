"""Drive-level switching policies.

Every policy shares the same life cycle: the system probes at the weak
exlo level until the filtered transmission crosses the trigger threshold,
which switches the drive to the trap-on level.  Feedback then alternates
between two levels (fb_high/fb_low) according to the policy:

* hysteresis_direct  - switch on asymmetric-hysteresis crossings of the
  (box-filtered, noiseless) radial velocity: up through +lim while low,
  down through -(lim+delta) while high;
* cycle_delay        - one forced switch a fixed time after the trigger,
  then switches scheduled one measured oscillation period (minus a
  correction for the estimator delay) after each rho_dot_est crossing;
* open_loop          - blind alternation at a fixed interval;
* constant           - no switching after the trigger.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ControllerConfig:
    policy: str = "cycle_delay"
    lim: float = 0.05              # m/s (0.05 um/us)
    delta: float = 0.03            # m/s
    first_switch_delay: float = 45e-6   # s after trigger
    wait_correction: float = 20e-6      # s subtracted from the measured period
    open_loop_interval: float = 45e-6   # s
    trigger_threshold: float | None = None   # absolute filtered-T threshold
    trigger_contrast_fraction: float = 0.5    # used when threshold is None
    # extra smoothing on the trigger path only: the one-time trigger can
    # integrate longer than the tracking bandwidth, and must, for the
    # threshold to sit clear of the shot noise
    trigger_filter_window: float = 30e-6     # s
    trap_on_level: str = "hi"
    fb_high: str = "hi"
    fb_low: str = "lo"
    nominal_period: float = 100e-6  # clamp scale for measured periods
    # velocity input: "estimator" (rho_dot_est) or "true_boxcar" (the
    # box-filtered true rho_dot of the perfect-sensing study)
    control_signal: str = "estimator"

    def __post_init__(self):
        if self.policy not in ("hysteresis_direct", "cycle_delay",
                               "open_loop", "constant"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.lim <= 0 or self.delta < 0:
            raise ValueError("need lim > 0 and delta >= 0")
        if self.control_signal not in ("estimator", "true_boxcar"):
            raise ValueError(f"unknown control signal {self.control_signal!r}")

    @property
    def upper_limit(self) -> float:
        return self.lim

    @property
    def lower_limit(self) -> float:
        return -(self.lim + self.delta)


@dataclass(frozen=True)
class ControlEvent:
    t: float
    from_level: str
    to_level: str
    cause: str   # trigger | hysteresis_up | hysteresis_down | scheduled_wait
                 # | open_loop_tick | forced_first

    def as_dict(self) -> dict:
        return {"t": self.t, "from_level": self.from_level,
                "to_level": self.to_level, "cause": self.cause}


def trigger_threshold(maps, config: ControllerConfig, probe_level: str = "exlo") -> float:
    """Absolute filtered-T trigger threshold.

    Defaults to the empty-cavity level plus a configured fraction of the
    maximum atom-induced contrast at the probe drive.
    """
    if config.trigger_threshold is not None:
        return config.trigger_threshold
    empty = maps.empty_transmission(probe_level)
    peak = maps.peak_transmission(probe_level)
    return empty + config.trigger_contrast_fraction * (peak - empty)


class Controller:
    """Stateful switching policy driven once per information step."""

    def __init__(self, config: ControllerConfig, threshold: float):
        self.config = config
        self.threshold = threshold
        self.level = "exlo"
        self.triggered = False
        self.trigger_time = None
        self._events: list[ControlEvent] = []
        # hysteresis crossing detection
        self._prev_signal = None
        # cycle_delay state: last crossing time and last completed period
        # per direction, plus at most one pending switch per direction
        self._forced_done = False
        self._last_cross = {"up": None, "down": None}
        self._period = {"up": None, "down": None}
        self._pending = {"up": None, "down": None}
        # open loop state
        self._next_tick = None

    @property
    def events(self) -> list[ControlEvent]:
        return list(self._events)

    def _switch(self, t, to_level, cause):
        if to_level == self.level:
            return None
        ev = ControlEvent(t, self.level, to_level, cause)
        self._events.append(ev)
        self.level = to_level
        return ev

    def check_trigger(self, t: float, filtered_t: float):
        """Trigger test while still probing at exlo."""
        if self.triggered or filtered_t <= self.threshold:
            return None
        self.triggered = True
        self.trigger_time = t
        cfg = self.config
        if cfg.policy == "open_loop":
            self._next_tick = t + cfg.open_loop_interval
        return self._switch(t, cfg.trap_on_level, "trigger")

    def update(self, t: float, signal: float, warmed_up: bool = True):
        """One post-trigger control step; returns a ControlEvent or None.

        signal is the velocity input of the active policy: the
        box-filtered true rho_dot for hysteresis_direct (or rho_dot_est in
        the delay-pathology configuration), rho_dot_est for cycle_delay.
        Crossings during estimator warm-up are ignored.
        """
        if not self.triggered:
            return None
        cfg = self.config
        if cfg.policy == "constant":
            return None
        if cfg.policy == "open_loop":
            if t + 1e-15 >= self._next_tick:
                self._next_tick += cfg.open_loop_interval
                target = cfg.fb_low if self.level == cfg.fb_high else cfg.fb_high
                return self._switch(t, target, "open_loop_tick")
            return None

        crossing = None
        if warmed_up:
            prev = self._prev_signal
            if prev is not None:
                if prev < cfg.upper_limit <= signal:
                    crossing = "up"
                elif prev > cfg.lower_limit >= signal:
                    crossing = "down"
            self._prev_signal = signal
        else:
            self._prev_signal = None

        if cfg.policy == "hysteresis_direct":
            if crossing == "up" and self.level == cfg.fb_low:
                return self._switch(t, cfg.fb_high, "hysteresis_up")
            if crossing == "down" and self.level == cfg.fb_high:
                return self._switch(t, cfg.fb_low, "hysteresis_down")
            return None

        # cycle_delay: predict the next turning point one measured cycle
        # ahead, so each wait uses the period recorded one cycle back
        if crossing is not None:
            prev_period = self._period[crossing]
            if prev_period is not None:
                wait = max(prev_period - cfg.wait_correction, 1e-6)
                target = cfg.fb_high if crossing == "up" else cfg.fb_low
                # newest crossing of a direction supersedes its pending switch
                self._pending[crossing] = (t + wait, target)
            last = self._last_cross[crossing]
            if last is not None:
                self._period[crossing] = min(max(t - last, 1e-6),
                                             4.0 * cfg.nominal_period)
            self._last_cross[crossing] = t

        if not self._forced_done and t + 1e-15 >= self.trigger_time + cfg.first_switch_delay:
            self._forced_done = True
            return self._switch(t, cfg.fb_low, "forced_first")

        due = None
        for direction in ("up", "down"):
            p = self._pending[direction]
            if p is not None and t + 1e-15 >= p[0]:
                if due is None or p[0] < due[1][0]:
                    due = (direction, p)
        if due is not None:
            direction, (_, target) = due
            self._pending[direction] = None
            return self._switch(t, target, "scheduled_wait")
        return None
