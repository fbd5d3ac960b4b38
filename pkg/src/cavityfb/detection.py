"""Shot-noise model for the heterodyne transmission record.

The noiseless |<a>|^2 channel is sampled at 1 MHz and corrupted with
signal-dependent Gaussian white noise, std = gain * sqrt(T + floor)
(photocurrent shot noise grows with the square root of the optical
power).  The 100 kHz detection bandwidth is applied downstream in the
estimator chain, matching the processing order of the experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    noise_gain: float = 0.0
    floor: float = 0.0
    mode: str = "signal_sqrt"   # or "linear" for sensitivity studies

    def __post_init__(self):
        if self.noise_gain < 0 or self.floor < 0:
            raise ValueError("noise_gain and floor must be non-negative")
        if self.mode not in ("signal_sqrt", "linear"):
            raise ValueError(f"unknown noise mode {self.mode!r}")

    def sigma(self, t_noiseless):
        """Per-sample noise std for a given noiseless transmission."""
        t = np.maximum(np.asarray(t_noiseless, dtype=float), 0.0)
        if self.mode == "signal_sqrt":
            return self.noise_gain * np.sqrt(t + self.floor)
        return self.noise_gain * (t + self.floor)


def add_shot_noise(t_noiseless, model: NoiseModel, rng: np.random.Generator):
    """T + n with n ~ Normal(0, sigma(T)^2), independent across samples."""
    t = np.asarray(t_noiseless, dtype=float)
    if model.noise_gain == 0.0:
        return t.copy() if t.ndim else float(t)
    out = t + model.sigma(t) * rng.standard_normal(t.shape)
    return out if t.ndim else float(out)


def amplitude_spectral_density(model: NoiseModel, t_noiseless: float,
                               sample_rate: float) -> float:
    """One-sided ASD of the injected noise, 1/sqrt(Hz) in T units.

    White noise of per-sample variance sigma^2 at rate fs has one-sided
    PSD 2 sigma^2/fs over [0, fs/2].
    """
    return float(model.sigma(t_noiseless)) * math.sqrt(2.0 / sample_rate)


def calibrate_noise(maps, level: str, target_sensitivity: float = 20e-9,
                    sample_rate: float = 1e6, floor: float = 0.0) -> NoiseModel:
    """Fix the noise gain from a position-sensitivity target.

    The gain is chosen so that the transmission-noise ASD divided by
    |dT/drho| at the steepest point of the inversion branch equals
    target_sensitivity (m/sqrt(Hz)).  The ASD is evaluated at the local
    transmission value, so for the sqrt model
        gain = s * |dT/drho| / (sqrt(2/fs) * sqrt(T* + floor)).
    """
    if target_sensitivity < 0:
        raise ValueError("target sensitivity must be non-negative")
    rho_star, slope = maps.steepest_slope(level)
    if slope <= 0:
        raise ValueError("degenerate |dT/drho|; cannot calibrate")
    t_star = float(maps.transmission(level, rho_star))
    asd_target = target_sensitivity * slope
    unit = NoiseModel(noise_gain=1.0, floor=floor)
    asd_unit = amplitude_spectral_density(unit, t_star, sample_rate)
    return NoiseModel(noise_gain=asd_target / asd_unit, floor=floor)


def position_sensitivity(maps, level: str, model: NoiseModel,
                         sample_rate: float = 1e6) -> float:
    """Achieved sensitivity at the steepest branch point, m/sqrt(Hz)."""
    rho_star, slope = maps.steepest_slope(level)
    t_star = float(maps.transmission(level, rho_star))
    return amplitude_spectral_density(model, t_star, sample_rate) / slope


def resolvable_amplitude(sensitivity: float, orbit_period: float) -> float:
    """Smallest rho-oscillation amplitude resolvable over one orbit, m.

    amplitude = sensitivity * sqrt(1/(2 pi tau_r)) for an orbit of period
    tau_r: the measurement integrates over the orbital bandwidth.
    """
    return sensitivity * math.sqrt(1.0 / (2.0 * math.pi * orbit_period))
