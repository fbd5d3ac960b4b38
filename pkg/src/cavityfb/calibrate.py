"""Calibration of the dynamical-noise and sensor-noise magnitudes.

The diffusion gain is anchored to a heating-rate target: the mean energy
gained per orbital period on a reference orbit (drive hi, radial
amplitude half a waist) must equal a stated fraction of the trap depth.
The sensor noise gain is anchored to a position-sensitivity target at the
steepest point of the transmission branch (see detection.calibrate_noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import detection
from .dynamics import Integrator, SimConfig, line_orbit_state, oscillation_period
from .maps import DiffusionModel


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffusionCalibration:
    model: DiffusionModel
    level: str
    amplitude: float          # reference orbit outer radius, m
    orbit_period: float       # full orbital period tau_r = 2 x rho period, s
    target_per_period: float  # J
    measured_per_period: float  # J, at the returned gain
    n_runs: int
    n_periods: int

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("level", "amplitude", "orbit_period", "target_per_period",
              "measured_per_period", "n_runs", "n_periods")}
        d["calibration_gain"] = self.model.calibration_gain
        return d


def reference_orbit_period(maps, level: str = "hi",
                           amplitude_w0: float = 0.5) -> float:
    """Full orbital period tau_r of the reference orbit, s.

    The rho oscillation of an L = 0 line orbit repeats twice per orbit,
    so tau_r is twice the quadrature rho period.
    """
    amp = amplitude_w0 * maps.params.w0
    return 2.0 * oscillation_period(maps, level, amp)


def _ensemble_heating(maps, level, amplitude, gain, n_runs, n_periods,
                      master_seed, substeps=30):
    """Mean diffusive energy gain per orbital period over an ensemble, J.

    Uses the integrator's kick-energy accumulator (unbiased for the mean
    energy gain, far lower variance than endpoint energy differences).
    """
    tau_r = 2.0 * oscillation_period(maps, level, amplitude)
    cfg = SimConfig.axial_pinned(gravity=False, substeps=substeps)
    model = DiffusionModel.for_params(
        maps.params, calibration_gain=gain,
        dimensional_projection=maps.diffusion_model.dimensional_projection
        if maps.diffusion_model else 1.0)
    scale = model.scale
    n_info = int(round(n_periods * tau_r / cfg.dt_info))
    gains = np.empty(n_runs)
    for run in range(n_runs):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=master_seed, spawn_key=(run,)))
        integ = Integrator(maps, cfg)
        st = line_orbit_state(maps, level, amplitude)
        st.level = level
        heat = 0.0
        for _ in range(n_info):
            kicks = rng.standard_normal((cfg.substeps, 3))
            heat += integ.step_interval(st, cfg.substeps, kicks, scale)
        gains[run] = heat / n_periods
    return float(np.mean(gains)), tau_r


def calibrate_diffusion(maps, level: str = "hi", amplitude_w0: float = 0.5,
                        target_fraction: float = 0.02,
                        n_runs: int = 16, n_periods: int = 3,
                        master_seed: int = 777, substeps: int = 30,
                        tolerance: float = 0.05,
                        max_iterations: int = 4) -> DiffusionCalibration:
    """Fix the diffusion gain from the heating-per-orbit target.

    target = target_fraction * U0(level) per orbital period tau_r on the
    reference orbit.  Secant iteration on the gain; the heating is linear
    in the gain up to the small feedback of the noise on the sampled
    orbit, so this converges in one or two steps.  Deterministic for a
    fixed master_seed.
    """
    depth = maps.depth(level)
    if depth <= 0:
        raise CalibrationError(f"level {level!r} does not trap; cannot calibrate")
    target = target_fraction * depth
    amplitude = amplitude_w0 * maps.params.w0
    gain = 1.0
    measured = None
    for _ in range(max_iterations):
        measured, tau_r = _ensemble_heating(
            maps, level, amplitude, gain, n_runs, n_periods,
            master_seed, substeps)
        if measured <= 0:
            raise CalibrationError("zero heating measured; check the maps")
        ratio = measured / target
        if abs(ratio - 1.0) <= tolerance:
            break
        gain /= ratio
    else:
        raise CalibrationError(
            f"gain search did not converge: measured/target = {measured / target:.3f}")
    proj = (maps.diffusion_model.dimensional_projection
            if maps.diffusion_model else 1.0)
    model = DiffusionModel.for_params(
        maps.params, calibration_gain=gain, dimensional_projection=proj)
    return DiffusionCalibration(
        model=model, level=level, amplitude=amplitude, orbit_period=tau_r,
        target_per_period=target, measured_per_period=measured,
        n_runs=n_runs, n_periods=n_periods)


def calibrate_all(maps, level: str = "hi",
                  sensitivity_target: float = 20e-9,
                  heating_fraction: float = 0.02,
                  master_seed: int = 777, **kw):
    """Diffusion and sensor-noise calibration in one pass.

    Attaches the calibrated diffusion model to the maps and returns
    (diffusion_calibration, noise_model, report).
    """
    cal = calibrate_diffusion(maps, level=level,
                              target_fraction=heating_fraction,
                              master_seed=master_seed, **kw)
    maps.diffusion_model = cal.model
    noise = detection.calibrate_noise(maps, level, sensitivity_target)
    sens = detection.position_sensitivity(maps, level, noise)
    report = {
        "diffusion": cal.as_dict(),
        "noise": {
            "noise_gain": noise.noise_gain,
            "floor": noise.floor,
            "mode": noise.mode,
            "sensitivity_m_per_sqrthz": sens,
            "resolvable_amplitude_m":
                detection.resolvable_amplitude(sens, cal.orbit_period),
        },
    }
    return cal, noise, report
