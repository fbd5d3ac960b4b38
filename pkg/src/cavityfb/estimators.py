"""Streaming estimators for the radial coordinate and its rate.

The pipeline mirrors the experiment's digital processing at the 1 MHz
information rate: an RC low-pass (single-pole IIR) on the noisy
transmission, a lookup inversion to rho, and a least-squares-slope FIR
for d rho/dt.  A trailing box filter is available for the
noiseless-sensing studies.  All filters are causal; the FIR emits zero
until its window has filled.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class EstimatorSettings:
    """Window and bandwidth configuration for the estimator chain."""

    rc_cutoff: float = 100e3     # Hz
    fir_window: float = 40e-6    # s (30-40 us is the useful range)
    box_window: float = 10e-6    # s, noiseless-sensing studies only


class RCLowPass:
    """First-order IIR: y[k] = y[k-1] + alpha (x[k] - y[k-1])."""

    def __init__(self, cutoff_hz: float, dt: float):
        if cutoff_hz <= 0 or dt <= 0:
            raise ValueError("cutoff and dt must be positive")
        self.rc = 1.0 / (2.0 * math.pi * cutoff_hz)
        self.alpha = dt / (self.rc + dt)
        self.y = 0.0
        self._primed = False

    def reset(self):
        self.y = 0.0
        self._primed = False

    def step(self, x: float) -> float:
        if not self._primed:
            # start on the first sample instead of relaxing up from zero
            self.y = x
            self._primed = True
        else:
            self.y += self.alpha * (x - self.y)
        return self.y


class BoxFilter:
    """Trailing moving average over a fixed number of samples."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be at least one sample")
        self.window = window
        self._buf = deque(maxlen=window)
        self._sum = 0.0

    def reset(self):
        self._buf.clear()
        self._sum = 0.0

    def step(self, x: float) -> float:
        if len(self._buf) == self.window:
            self._sum -= self._buf[0]
        self._buf.append(x)
        self._sum += x
        return self._sum / len(self._buf)


class SlopeFIR:
    """Least-squares slope of the trailing window.

    The closed-form LSQ slope over N uniformly spaced samples uses
    antisymmetric weights proportional to (i - (N-1)/2); it reproduces
    the derivative of linear inputs exactly and estimates the derivative
    at the window midpoint, i.e. with a delay of (N-1) dt/2.  Emits 0
    until the window has filled (the warm-up).
    """

    def __init__(self, window: int, dt: float):
        if window < 2:
            raise ValueError("slope window needs at least two samples")
        self.window = window
        self.dt = dt
        self._buf = deque(maxlen=window)
        n = window
        self._denom = dt * n * (n * n - 1) / 12.0
        self._sum = 0.0       # sum of the window
        self._isum = 0.0      # sum of i * x_i, i = 0 at the oldest sample

    def reset(self):
        self._buf.clear()
        self._sum = 0.0
        self._isum = 0.0

    @property
    def warmed_up(self) -> bool:
        return len(self._buf) == self.window

    @property
    def delay(self) -> float:
        """Nominal estimator delay, s."""
        return (self.window - 1) * self.dt / 2.0

    def step(self, x: float) -> float:
        # O(1) sliding update: dropping the oldest sample shifts every
        # index down by one, so isum' = isum + N x_new - sum'.
        n = len(self._buf)
        if n == self.window:
            oldest = self._buf[0]
            self._buf.append(x)
            self._sum += x - oldest
            self._isum += self.window * x - self._sum
        else:
            self._buf.append(x)
            self._sum += x
            self._isum += n * x
            if n + 1 < self.window:
                return 0.0
        mid = (self.window - 1) / 2.0
        return (self._isum - mid * self._sum) / self._denom


class EstimatorChain:
    """Noisy transmission -> (rho_est, rho_dot_est) with built-in delays.

    The inversion table follows the active drive level; on a switch the
    RC state is kept (an analog filter does not reset across an intensity
    step) and the lookup swaps immediately.
    """

    def __init__(self, maps, level: str, dt: float = 1e-6,
                 rc_cutoff: float = 100e3, fir_window: float = 40e-6,
                 box_window: float = 10e-6):
        for name, w in (("fir_window", fir_window), ("box_window", box_window)):
            k = w / dt
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"{name} must be an integer multiple of dt")
        self.maps = maps
        self.level = level
        self.dt = dt
        self.rc = RCLowPass(rc_cutoff, dt)
        self.fir = SlopeFIR(int(round(fir_window / dt)), dt)
        self.box = BoxFilter(int(round(box_window / dt)))
        self.filtered_t = 0.0
        self.rho_est = 0.0
        self.rho_dot_est = 0.0

    @property
    def nominal_delay(self) -> float:
        return self.fir.delay

    @property
    def warmed_up(self) -> bool:
        return self.fir.warmed_up

    def set_level(self, level: str):
        self.level = level

    def step(self, t_noisy: float) -> tuple[float, float]:
        """Advance one information step; returns (rho_est, rho_dot_est)."""
        self.filtered_t = self.rc.step(t_noisy)
        self.rho_est = float(self.maps.invert_transmission(self.level, self.filtered_t))
        self.rho_dot_est = self.fir.step(self.rho_est)
        return self.rho_est, self.rho_dot_est
