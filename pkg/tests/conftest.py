"""Shared fixtures: one calibrated map set per session, cached on disk.

The steady-state scans take ~20 s at the test grid, so the built and
calibrated tables are persisted under .test_cache/ keyed by the relevant
config sections; delete the directory to force a rebuild.
"""

import json
from pathlib import Path

import pytest

from cavityfb import config as cfgmod
from cavityfb.calibrate import calibrate_all
from cavityfb.detection import NoiseModel
from cavityfb.maps import GridSpec, RadialMaps, build_maps
from cavityfb.params import SystemParams

TEST_GRID = {"n_rho": 256, "rho_max_w0": 3.0, "n_g": 256}
CACHE_ROOT = Path(__file__).resolve().parent.parent / ".test_cache"


def _cache_key():
    cfg = cfgmod.default_config()
    cfg["grid"].update(TEST_GRID)
    key_src = {k: cfg[k] for k in ("system", "hilbert", "grid", "calibration")}
    return cfgmod.config_digest({"schema_version": 1, **key_src})


def build_test_maps():
    """Build (or load) the session map set with calibrations attached."""
    key = _cache_key()
    stem = CACHE_ROOT / f"maps_{key}"
    noise_path = CACHE_ROOT / f"noise_{key}.json"
    if noise_path.exists():
        maps = RadialMaps.load(stem)
        with open(noise_path) as f:
            payload = json.load(f)
        noise = NoiseModel(**payload["noise"])
        return maps, noise, payload["report"]
    CACHE_ROOT.mkdir(exist_ok=True)
    params = SystemParams()
    maps = build_maps(params, grid=GridSpec(**TEST_GRID), jobs=2)
    cal, noise, report = calibrate_all(maps)
    maps.save(stem)
    with open(noise_path, "w") as f:
        json.dump({"noise": {"noise_gain": noise.noise_gain,
                             "floor": noise.floor, "mode": noise.mode},
                   "report": report}, f)
    return maps, noise, report


@pytest.fixture(scope="session")
def maps():
    m, _, _ = build_test_maps()
    return m


@pytest.fixture(scope="session")
def noise_model():
    _, n, _ = build_test_maps()
    return n


@pytest.fixture(scope="session")
def calibration_report():
    _, _, r = build_test_maps()
    return r


@pytest.fixture(scope="session")
def params():
    return SystemParams()
