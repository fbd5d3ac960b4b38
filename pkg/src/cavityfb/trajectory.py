"""Single-trajectory simulation: dynamics, sensing, estimation, control.

Each information step (1 us) integrates the fine-grained dynamics at the
active drive level, emits the noiseless transmission at the instantaneous
coupling, adds shot noise, advances the estimator chain, and feeds the
controller.  A drive switch decided at an information sample takes effect
at the first dynamics step of the next interval.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .controllers import Controller, ControllerConfig, ControlEvent, trigger_threshold
from .detection import NoiseModel
from .dynamics import AtomState, Integrator, SimConfig, sample_initial
from .estimators import BoxFilter, EstimatorChain
from .params import HBAR

RECORD_COLUMNS = ["t_us", "rho_um", "drho_dt_um_per_us", "x_nm", "L_norm",
                  "level", "T_noiseless", "T_noisy", "rho_est_um",
                  "drho_dt_est_um_per_us"]


@dataclass
class TrajectoryRecord:
    """Uniformly sampled truth, record, and estimate channels plus events."""

    dt_info: float
    t: np.ndarray
    rho: np.ndarray
    rho_dot: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    L: np.ndarray
    level: list
    t_noiseless: np.ndarray
    t_noisy: np.ndarray
    rho_est: np.ndarray
    rho_dot_est: np.ndarray
    energy: np.ndarray           # kinetic + optical potential at active level
    energy_ref: np.ndarray       # same, potential taken in the reference level
    events: list = field(default_factory=list)
    termination: str = "t_max"
    triggered: bool = False
    trigger_time: float | None = None
    reference_level: str = "hi"

    def __len__(self):
        return self.t.size

    @property
    def dwell_time(self) -> float | None:
        """Trigger to end of record, s (None when never triggered)."""
        if not self.triggered:
            return None
        return float(self.t[-1] - self.trigger_time)

    def window_slice(self, start: float, stop: float) -> slice:
        """Index slice for trigger-relative times [start, stop)."""
        if not self.triggered:
            raise ValueError("no trigger in this record")
        rel = self.t - self.trigger_time
        i0 = int(np.searchsorted(rel, start - 1e-12))
        i1 = int(np.searchsorted(rel, stop - 1e-12))
        return slice(i0, i1)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(RECORD_COLUMNS)
            for i in range(len(self)):
                wr.writerow([
                    f"{self.t[i] * 1e6:.6f}",
                    f"{self.rho[i] * 1e6:.9g}",
                    f"{self.rho_dot[i]:.9g}",          # m/s == um/us
                    f"{self.x[i] * 1e9:.9g}",
                    f"{self.L[i] / HBAR:.9g}",
                    self.level[i],
                    f"{self.t_noiseless[i]:.9g}",
                    f"{self.t_noisy[i]:.9g}",
                    f"{self.rho_est[i] * 1e6:.9g}",
                    f"{self.rho_dot_est[i]:.9g}",
                ])

    def sidecar(self) -> dict:
        return {
            "termination": self.termination,
            "triggered": self.triggered,
            "trigger_time_us": None if self.trigger_time is None
                               else self.trigger_time * 1e6,
            "dwell_time_us": None if self.dwell_time is None
                             else self.dwell_time * 1e6,
            "n_samples": len(self),
            "events": [e.as_dict() for e in self.events],
        }

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(self.sidecar(), f, indent=2)


def run_trajectory(maps, sim: SimConfig, control: ControllerConfig,
                   noise: NoiseModel | None, rng: np.random.Generator,
                   estimator=None, initial_state: AtomState | None = None,
                   reference_level: str | None = None) -> TrajectoryRecord:
    """Simulate one atom drop under the given policy.

    estimator: EstimatorSettings-like object with rc_cutoff, fir_window,
    box_window attributes (defaults used when None).  The controller's
    velocity input is rho_dot_est unless control.control_signal selects
    the box-filtered true rho_dot (the perfect-sensing study).
    """
    from .estimators import EstimatorSettings
    est = estimator or EstimatorSettings()
    integ = Integrator(maps, sim)
    state = (initial_state.copy() if initial_state is not None
             else sample_initial(sim, maps.params, rng))
    chain = EstimatorChain(maps, state.level, dt=sim.dt_info,
                           rc_cutoff=est.rc_cutoff, fir_window=est.fir_window,
                           box_window=est.box_window)
    boxcar = BoxFilter(int(round(est.box_window / sim.dt_info)))
    trig_window = max(int(round(control.trigger_filter_window / sim.dt_info)), 1)
    trig_box = BoxFilter(trig_window)
    ctrl = Controller(control, trigger_threshold(maps, control))
    dm = maps.diffusion_model
    diff_scale = dm.scale if dm is not None else 0.0
    use_true_signal = getattr(control, "control_signal", "estimator") == "true_boxcar"
    reference_level = reference_level or control.fb_high

    n_max = int(round(sim.t_max / sim.dt_info))
    cols = {name: np.empty(n_max) for name in
            ("t", "rho", "rho_dot", "x", "y", "z", "L", "t_noiseless",
             "t_noisy", "rho_est", "rho_dot_est", "energy", "energy_ref")}
    levels = []
    escape_rho = sim.escape_rho_w0 * maps.params.w0
    exit_plane = -sim.entry_height_w0 * maps.params.w0
    mass = maps.params.mass

    termination = "t_max"
    escape_run = 0
    n_box_seen = 0
    n = 0
    for k in range(n_max):
        if diff_scale > 0.0:
            kicks = rng.standard_normal((sim.substeps, 3))
        else:
            kicks = None
        integ.step_interval(state, sim.substeps, kicks, diff_scale)

        t = (k + 1) * sim.dt_info
        state.t = t
        rho = state.rho
        x = state.position[0]
        t_clean = float(maps.transmission(state.level, rho, x=x))
        if noise is not None and noise.noise_gain > 0.0:
            t_meas = t_clean + float(noise.sigma(t_clean)) * rng.standard_normal()
        else:
            t_meas = t_clean
        rho_est, rho_dot_est = chain.step(t_meas)
        rd_true = state.rho_dot
        rd_box = boxcar.step(rd_true)
        n_box_seen += 1

        level_now = state.level
        ke = float(state.momentum @ state.momentum) / (2.0 * mass)
        u_here = float(maps.potential_at(level_now, x, rho))
        u_ref = float(maps.potential_at(reference_level, x, rho))

        cols["t"][n] = t
        cols["rho"][n] = rho
        cols["rho_dot"][n] = rd_true
        cols["x"][n] = x
        cols["y"][n] = state.position[1]
        cols["z"][n] = state.position[2]
        cols["L"][n] = state.angular_momentum
        cols["t_noiseless"][n] = t_clean
        cols["t_noisy"][n] = t_meas
        cols["rho_est"][n] = rho_est
        cols["rho_dot_est"][n] = rho_dot_est
        cols["energy"][n] = ke + u_here
        cols["energy_ref"][n] = ke + u_ref
        levels.append(level_now)
        n += 1

        if not ctrl.triggered:
            trig_t = trig_box.step(chain.filtered_t)
            # hold off until the trigger filter has filled
            ev = ctrl.check_trigger(t, trig_t) if k + 1 >= trig_window else None
        else:
            if use_true_signal:
                sig = rd_box
                warmed = n_box_seen >= boxcar.window
            else:
                sig = rho_dot_est
                warmed = chain.warmed_up
            ev = ctrl.update(t, sig, warmed)
        if ev is not None:
            state.level = ev.to_level
            chain.set_level(ev.to_level)

        if ctrl.triggered:
            if rho > escape_rho and rd_true > 0.0:
                termination = "escaped"
                break
            if cols["energy"][n - 1] > 0.0:
                escape_run += 1
                if escape_run >= sim.energy_escape_steps:
                    termination = "escaped"
                    break
            else:
                escape_run = 0
        elif state.position[2] < exit_plane:
            termination = "never_triggered"
            break

    if not ctrl.triggered:
        termination = "never_triggered" if termination != "t_max" else "t_max"

    rec = TrajectoryRecord(
        dt_info=sim.dt_info,
        t=cols["t"][:n].copy(), rho=cols["rho"][:n].copy(),
        rho_dot=cols["rho_dot"][:n].copy(), x=cols["x"][:n].copy(),
        y=cols["y"][:n].copy(), z=cols["z"][:n].copy(),
        L=cols["L"][:n].copy(), level=levels,
        t_noiseless=cols["t_noiseless"][:n].copy(),
        t_noisy=cols["t_noisy"][:n].copy(),
        rho_est=cols["rho_est"][:n].copy(),
        rho_dot_est=cols["rho_dot_est"][:n].copy(),
        energy=cols["energy"][:n].copy(),
        energy_ref=cols["energy_ref"][:n].copy(),
        events=ctrl.events, termination=termination,
        triggered=ctrl.triggered, trigger_time=ctrl.trigger_time,
        reference_level=reference_level,
    )
    return rec
