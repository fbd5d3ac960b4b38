import math

import pytest

from cavityfb.params import (DEFAULT_N_FOCK, TWO_PI, HilbertSpace,
                             SystemParams, n_fock_for)


def test_default_rates():
    p = SystemParams()
    assert p.g0 == pytest.approx(TWO_PI * 110e6)
    assert p.kappa == pytest.approx(TWO_PI * 14.2e6)
    assert p.gamma == pytest.approx(TWO_PI * 2.6e6)
    # detunings relative to the probe, derived from the quoted
    # cavity-atom (-47 MHz) and probe-atom (-125 MHz) offsets
    assert p.delta_ap == pytest.approx(TWO_PI * 125e6)
    assert p.delta_cp == pytest.approx(TWO_PI * 78e6)
    assert p.drive_levels == {"exlo": 0.05, "lo": 0.15, "hi": 0.3, "exhi": 0.6}


def test_coupling_landmarks():
    p = SystemParams()
    assert p.coupling(0.0, 0.0) == pytest.approx(p.g0)
    assert p.coupling(p.wavelength / 4, 0.0) == pytest.approx(0.0, abs=p.g0 * 1e-12)
    assert p.coupling(0.0, p.w0) == pytest.approx(p.g0 * math.exp(-1.0))


def test_drive_amplitude_detuned_reference():
    p = SystemParams()
    for level, n in p.drive_levels.items():
        eps = p.drive_amplitude(level)
        assert eps == pytest.approx(math.sqrt(n * (p.kappa**2 + p.delta_cp**2)))
        assert p.empty_cavity_photons(level) == pytest.approx(n)
    assert p.drive_amplitude("exlo") == pytest.approx(
        p.drive_amplitude("hi") * math.sqrt(0.05 / 0.3))


def test_drive_amplitude_resonant_reference():
    p = SystemParams().with_drive_reference("resonant")
    assert p.drive_amplitude("hi") == pytest.approx(p.kappa * math.sqrt(0.3))
    zero = SystemParams(drive_levels={"off": 0.0})
    assert zero.drive_amplitude("off") == 0.0


def test_unknown_level_raises():
    with pytest.raises(KeyError, match="unknown drive level"):
        SystemParams().drive_amplitude("nope")


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        SystemParams(g0=-1.0)
    with pytest.raises(ValueError):
        SystemParams(drive_levels={"hi": -0.1})
    with pytest.raises(ValueError):
        SystemParams(drive_reference="weird")


def test_hilbert_space():
    assert HilbertSpace(4).dim == 10
    with pytest.raises(ValueError):
        HilbertSpace(1)


def test_n_fock_defaults_and_overrides():
    assert n_fock_for("hi") == DEFAULT_N_FOCK["hi"]
    assert n_fock_for("hi", {"hi": 6}) == 6
    # unknown levels get the most conservative truncation
    assert n_fock_for("custom") == max(DEFAULT_N_FOCK.values())
