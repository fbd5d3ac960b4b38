"""Run configuration: JSON schema, defaults, and object construction.

The file format uses the units the numbers are usually quoted in (MHz,
um, us, mm, uK); everything is converted to SI when the dataclasses are
built.  Unknown keys are rejected anywhere in the tree, and the defaults
reproduce the simulated experiment's settings.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .controllers import ControllerConfig
from .detection import NoiseModel
from .dynamics import SimConfig
from .estimators import EstimatorSettings
from .maps import GridSpec
from .params import SystemParams, TWO_PI

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "schema_version": CONFIG_SCHEMA_VERSION,
    "system": {
        "g0_mhz": 110.0,
        "kappa_mhz": 14.2,
        "gamma_mhz": 2.6,
        "cavity_atom_detuning_mhz": -47.0,
        "probe_atom_detuning_mhz": -125.0,
        "wavelength_nm": 852.35,
        "waist_um": 14.0,
        "mass_kg": 2.20694650e-25,
        "drive_levels": {"exlo": 0.05, "lo": 0.15, "hi": 0.3, "exhi": 0.6},
        "drive_reference": "detuned",
    },
    "hilbert": {
        "n_fock": {"exlo": 8, "lo": 10, "hi": 12, "exhi": 14},
    },
    "grid": {
        "n_rho": 2048,
        "rho_max_w0": 3.0,
        "n_g": 2048,
    },
    "calibration": {
        "level": "hi",
        "reference_amplitude_w0": 0.5,
        "heating_fraction_per_orbit": 0.02,
        "sensitivity_nm_per_sqrthz": 20.0,
        "noise_floor": 0.0,
        "noise_mode": "signal_sqrt",
        "master_seed": 777,
        "n_runs": 16,
        "n_periods": 3,
    },
    "sim": {
        "mode": "full3d",
        "dt_info_us": 1.0,
        "substeps": 3000,
        "t_max_ms": 20.0,
        "drop_height_mm": 3.0,
        "mot_temperature_uk": 10.0,
        "entry_width_um": 45.0,
        "entry_height_w0": 2.5,
        "escape_rho_w0": 2.5,
        "energy_escape_steps": 10,
        "gravity": True,
        "friction_beta_per_s": 0.0,
        "axial_diffusion_factor": 1.0,
    },
    "estimator": {
        "rc_cutoff_khz": 100.0,
        "fir_window_us": 40.0,
        "box_window_us": 10.0,
    },
    "controller": {
        "policy": "cycle_delay",
        "lim_um_per_us": 0.05,
        "delta_um_per_us": 0.03,
        "first_switch_delay_us": 45.0,
        "wait_correction_us": 20.0,
        "open_loop_interval_us": 45.0,
        "trigger_threshold": None,
        "trigger_contrast_fraction": 0.5,
        "trigger_filter_window_us": 30.0,
        "trap_on_level": "hi",
        "fb_high": "hi",
        "fb_low": "lo",
        "nominal_period_us": 100.0,
        "control_signal": "estimator",
    },
    "campaign": {
        "n_drops": 2000,
        "master_seed": 12345,
        "jobs": 0,
    },
}

# axial-pinned studies trap deeper and feed back between exhi and hi
AXIAL_PINNED_OVERRIDES = {
    "sim": {"mode": "axial_pinned", "substeps": 30, "t_max_ms": 60.0},
    "controller": {"trap_on_level": "exhi", "fb_high": "exhi", "fb_low": "hi",
                   "open_loop_interval_us": 40.0},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict) and key != "drive_levels" \
                and key != "n_fock":
            if not isinstance(val, dict):
                raise ConfigError(f"{here} must be a table")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = copy.deepcopy(val)
    return out


def merge_config(overrides: dict) -> dict:
    """Defaults overlaid with a (possibly partial) override tree."""
    version = overrides.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"config schema_version {version!r} unsupported "
            f"(expected {CONFIG_SCHEMA_VERSION})")
    return _merge(DEFAULT_CONFIG, overrides)


def merge_overrides(cfg: dict, overrides: dict) -> dict:
    """A resolved config overlaid with further (partial) overrides."""
    return _merge(cfg, overrides)


def load_config(path) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return merge_config(data)


def apply_axial_pinned(cfg: dict) -> dict:
    return _merge(cfg, AXIAL_PINNED_OVERRIDES)


def config_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# -- constructors ---------------------------------------------------------

def make_params(cfg: dict) -> SystemParams:
    s = cfg["system"]
    delta_ap = -s["probe_atom_detuning_mhz"]
    delta_cp = s["cavity_atom_detuning_mhz"] - s["probe_atom_detuning_mhz"]
    return SystemParams(
        g0=TWO_PI * s["g0_mhz"] * 1e6,
        kappa=TWO_PI * s["kappa_mhz"] * 1e6,
        gamma=TWO_PI * s["gamma_mhz"] * 1e6,
        delta_cp=TWO_PI * delta_cp * 1e6,
        delta_ap=TWO_PI * delta_ap * 1e6,
        wavelength=s["wavelength_nm"] * 1e-9,
        w0=s["waist_um"] * 1e-6,
        mass=s["mass_kg"],
        drive_levels=dict(s["drive_levels"]),
        drive_reference=s["drive_reference"],
    )


def make_grid(cfg: dict) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(n_rho=g["n_rho"], rho_max_w0=g["rho_max_w0"], n_g=g["n_g"])


def make_sim(cfg: dict) -> SimConfig:
    s = cfg["sim"]
    return SimConfig(
        mode=s["mode"],
        dt_info=s["dt_info_us"] * 1e-6,
        substeps=s["substeps"],
        t_max=s["t_max_ms"] * 1e-3,
        drop_height=s["drop_height_mm"] * 1e-3,
        mot_temperature=s["mot_temperature_uk"] * 1e-6,
        entry_width=s["entry_width_um"] * 1e-6,
        entry_height_w0=s["entry_height_w0"],
        escape_rho_w0=s["escape_rho_w0"],
        energy_escape_steps=s["energy_escape_steps"],
        gravity=s["gravity"],
        friction_beta=s["friction_beta_per_s"],
        axial_diffusion_factor=s["axial_diffusion_factor"],
    )


def make_controller(cfg: dict, policy: str | None = None) -> ControllerConfig:
    c = cfg["controller"]
    return ControllerConfig(
        policy=policy or c["policy"],
        lim=c["lim_um_per_us"],            # um/us == m/s
        delta=c["delta_um_per_us"],
        first_switch_delay=c["first_switch_delay_us"] * 1e-6,
        wait_correction=c["wait_correction_us"] * 1e-6,
        open_loop_interval=c["open_loop_interval_us"] * 1e-6,
        trigger_threshold=c["trigger_threshold"],
        trigger_contrast_fraction=c["trigger_contrast_fraction"],
        trigger_filter_window=c["trigger_filter_window_us"] * 1e-6,
        trap_on_level=c["trap_on_level"],
        fb_high=c["fb_high"],
        fb_low=c["fb_low"],
        nominal_period=c["nominal_period_us"] * 1e-6,
        control_signal=c["control_signal"],
    )


def make_estimator(cfg: dict) -> EstimatorSettings:
    e = cfg["estimator"]
    return EstimatorSettings(
        rc_cutoff=e["rc_cutoff_khz"] * 1e3,
        fir_window=e["fir_window_us"] * 1e-6,
        box_window=e["box_window_us"] * 1e-6,
    )


def make_noise_from_report(cfg: dict, noise_gain: float) -> NoiseModel:
    cal = cfg["calibration"]
    return NoiseModel(noise_gain=noise_gain, floor=cal["noise_floor"],
                      mode=cal["noise_mode"])
