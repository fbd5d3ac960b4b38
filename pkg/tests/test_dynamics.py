"""Integrator and initial-condition checks."""

import math

import numpy as np
import pytest

from cavityfb.dynamics import (Integrator, SimConfig, circular_orbit_state,
                               harmonic_period, line_orbit_state,
                               oscillation_period, period_amplitude_curve,
                               reduced_quantities, sample_initial,
                               simulate_periods)
from cavityfb.params import G_EARTH, KB, SystemParams


def _rng(seed=0):
    return np.random.default_rng(seed)


def test_sample_initial_cold_drop(params):
    cfg = SimConfig.full3d(mot_temperature=0.0, drop_height=3e-3)
    st = sample_initial(cfg, params, _rng(5))
    v = st.momentum / params.mass
    assert v[0] == 0.0 and v[1] == 0.0
    assert v[2] == pytest.approx(-math.sqrt(2 * G_EARTH * 3e-3))
    assert st.position[2] == pytest.approx(cfg.entry_height_w0 * params.w0)
    assert abs(st.position[0]) <= params.wavelength / 2
    assert abs(st.position[1]) <= cfg.entry_width / 2
    assert st.level == "exlo"


def test_sample_initial_deterministic(params):
    cfg = SimConfig.full3d()
    a = sample_initial(cfg, params, _rng(42))
    b = sample_initial(cfg, params, _rng(42))
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.momentum, b.momentum)


def test_sample_initial_pinned_freezes_axis(params):
    cfg = SimConfig.axial_pinned()
    st = sample_initial(cfg, params, _rng(7))
    assert st.position[0] == 0.0 and st.momentum[0] == 0.0


def test_circular_orbit_stays_circular(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    st = circular_orbit_state(maps, "hi", 6e-6)
    integ = Integrator(maps, cfg)
    period = oscillation_period(maps, "hi", 6.5e-6,
                                L=abs(st.angular_momentum))
    n_info = int(10 * period / cfg.dt_info)
    drift = 0.0
    for _ in range(n_info):
        integ.step_interval(st, cfg.substeps)
        drift = max(drift, abs(st.rho - 6e-6))
    assert drift / 6e-6 < 1e-3


def test_energy_conservation_noise_free(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    st = line_orbit_state(maps, "hi", 8e-6)
    st.level = "hi"
    integ = Integrator(maps, cfg)
    e0 = integ.total_energy(st)
    for _ in range(1000):   # 1 ms
        integ.step_interval(st, cfg.substeps)
    e1 = integ.total_energy(st)
    assert abs(e1 - e0) / abs(e0) < 1e-4


def test_angular_momentum_conserved_when_pinned(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    st = circular_orbit_state(maps, "hi", 5e-6)
    st.momentum[1] = 0.3 * st.momentum[2]  # make it elliptical
    integ = Integrator(maps, cfg)
    L0 = st.angular_momentum
    # a million dynamics steps
    for _ in range(1000000 // cfg.substeps):
        integ.step_interval(st, cfg.substeps)
    assert abs(st.angular_momentum - L0) / abs(L0) < 1e-10


def test_gravity_accelerates_free_fall(maps):
    cfg = SimConfig.full3d(gravity=True, substeps=100)
    m = maps.params.mass
    from cavityfb.dynamics import make_state
    st = make_state(0.0, (0.0, 40e-6, 80e-6), (0.0, 0.0, 0.0), "exlo", m)
    integ = Integrator(maps, cfg)
    n = 500
    for _ in range(n):
        integ.step_interval(st, cfg.substeps)
    t = n * cfg.dt_info
    expect_vz = -G_EARTH * t
    assert st.momentum[2] / m == pytest.approx(expect_vz, rel=1e-3)


def test_simulated_periods_match_quadrature(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    for amp in (4e-6, 7e-6, 10e-6):
        p_sim = simulate_periods(maps, cfg, line_orbit_state(maps, "hi", amp))
        p_quad = oscillation_period(maps, "hi", amp)
        assert abs(p_sim - p_quad) / p_quad < 0.01


def test_period_with_angular_momentum(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    st = circular_orbit_state(maps, "hi", 5e-6)
    st.momentum[1] = 0.5 * abs(st.momentum[2])   # radial motion on top
    L = abs(st.angular_momentum)
    # outer turning radius from energy conservation
    integ = Integrator(maps, cfg)
    e = integ.total_energy(st)
    from cavityfb.dynamics import effective_potential
    rr = np.linspace(5e-6, 20e-6, 2000)
    v = effective_potential(maps, "hi", rr, L)
    r_max = rr[np.searchsorted(v - e > 0, True)]
    p_quad = oscillation_period(maps, "hi", r_max, L=L)
    p_sim = simulate_periods(maps, cfg, st)
    assert abs(p_sim - p_quad) / p_quad < 0.015


def test_period_small_amplitude_harmonic_limit(maps):
    # small but still resolved by the test grid; the quartic softening of
    # the Gaussian well contributes ~(3/16)(A/w)^2 ~ 1% at this amplitude
    p_small = oscillation_period(maps, "hi", 1.5e-6)
    assert p_small == pytest.approx(harmonic_period(maps, "hi"), rel=0.02)
    assert p_small > harmonic_period(maps, "hi") * 0.995


def test_period_grows_toward_trap_edge(maps):
    amps = np.array([4e-6, 8e-6, 12e-6, 16e-6, 20e-6])
    periods = np.array([oscillation_period(maps, "hi", a) for a in amps])
    assert np.all(np.diff(periods) > 0)
    # periods in the tens of microseconds near typical amplitudes
    assert 40e-6 < periods[0] < 80e-6


def test_period_beyond_edge_rejected(maps):
    with pytest.raises(ValueError, match="trap edge"):
        oscillation_period(maps, "hi", 3.0 * maps.params.w0)


def test_period_amplitude_curve_shape(maps):
    amps, periods = period_amplitude_curve(maps, "hi")
    assert amps.shape == periods.shape
    assert np.all(np.diff(periods) > 0)


def test_heating_accumulator_zero_without_noise(maps):
    cfg = SimConfig.axial_pinned(gravity=False)
    st = line_orbit_state(maps, "hi", 6e-6)
    st.level = "hi"
    integ = Integrator(maps, cfg)
    assert integ.step_interval(st, cfg.substeps) == 0.0


def test_reduced_quantities(maps):
    st = line_orbit_state(maps, "hi", maps.fitted_waist("hi"))
    red = reduced_quantities(st, maps.depth("hi"), maps.fitted_waist("hi"),
                             maps.params.mass)
    assert red["rho_t"] == pytest.approx(1.0)
    assert red["L_t"] == 0.0
    assert red["E"] > 0


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(mode="sideways")
    with pytest.raises(ValueError):
        SimConfig(substeps=0)
    assert SimConfig.full3d().dt_dynamics == pytest.approx(1e-6 / 3000)
    assert SimConfig.axial_pinned().dt_dynamics == pytest.approx(1e-6 / 30)
