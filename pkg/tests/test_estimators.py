"""Filter kernel identities and the estimator chain."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityfb.estimators import (BoxFilter, EstimatorChain, EstimatorSettings,
                                 RCLowPass, SlopeFIR)

DT = 1e-6


def run_filter(f, xs):
    return [f.step(x) for x in xs]


class TestRCLowPass:
    def test_alpha_formula(self):
        rc = RCLowPass(100e3, DT)
        expect_rc = 1 / (2 * math.pi * 100e3)
        assert rc.alpha == pytest.approx(DT / (expect_rc + DT))

    def test_dc_gain(self):
        rc = RCLowPass(100e3, DT)
        out = run_filter(rc, [3.7] * 200)
        assert out[-1] == pytest.approx(3.7, rel=1e-12)

    def test_step_response_envelope(self):
        rc = RCLowPass(100e3, DT)
        rc.step(0.0)   # settle at zero first
        out = run_filter(rc, [1.0] * 60)
        # discrete first-order response: 1 - (1-alpha)^k
        for k in (5, 20, 50):
            assert out[k - 1] == pytest.approx(1 - (1 - rc.alpha) ** k, rel=1e-12)
        # which tracks the continuous 1 - exp(-t/RC) envelope
        t = 20 * DT
        assert out[19] == pytest.approx(1 - math.exp(-t / rc.rc), abs=0.05)

    def test_attenuation_at_cutoff(self):
        fc = 100e3
        rc = RCLowPass(fc, DT)
        t = np.arange(40000) * DT
        x = np.sin(2 * np.pi * fc * t)
        y = np.array(run_filter(rc, x))
        ratio = y[2000:].std() / x[2000:].std()
        # -3 dB within the discretization error of fs/fc = 10
        assert 10 * math.log10(ratio**2) == pytest.approx(-3.0, abs=1.5)

    def test_priming(self):
        rc = RCLowPass(100e3, DT)
        assert rc.step(0.42) == 0.42


class TestBoxFilter:
    def test_constant_passthrough(self):
        box = BoxFilter(10)
        assert run_filter(box, [2.0] * 30)[-1] == 2.0

    def test_impulse_response(self):
        box = BoxFilter(5)
        out = run_filter(box, [0.0] * 5 + [1.0] + [0.0] * 10)
        impulse = out[5:10]
        assert impulse == pytest.approx([1 / 5] * 5)
        assert out[10] == 0.0

    def test_alternating_cancels(self):
        box = BoxFilter(10)
        xs = [(-1.0) ** k for k in range(50)]
        out = run_filter(box, xs)
        assert out[-1] == pytest.approx(0.0, abs=1e-12)

    def test_warmup_partial_average(self):
        box = BoxFilter(4)
        assert box.step(2.0) == 2.0
        assert box.step(4.0) == 3.0


class TestSlopeFIR:
    def test_exact_on_linear_ramp(self):
        fir = SlopeFIR(40, DT)
        b = 3.2e3
        xs = [1.0 + b * k * DT for k in range(100)]
        out = run_filter(fir, xs)
        assert out[38] == 0.0                      # still warming up
        for v in out[39:]:
            assert v == pytest.approx(b, rel=1e-9)

    def test_zero_on_constant(self):
        fir = SlopeFIR(40, DT)
        out = run_filter(fir, [5.5] * 80)
        assert out[-1] == pytest.approx(0.0, abs=1e-9)

    def test_matches_direct_least_squares(self):
        rng = np.random.default_rng(1)
        fir = SlopeFIR(17, DT)
        xs = rng.standard_normal(60)
        out = run_filter(fir, xs)
        # direct LSQ on the trailing window
        t = np.arange(17) * DT
        for k in range(16, 60):
            win = xs[k - 16:k + 1]
            slope = np.polyfit(t, win, 1)[0]
            assert out[k] == pytest.approx(slope, rel=1e-9, abs=1e-9)

    def test_sine_response_matches_convolution_oracle(self):
        # analytic check: the streaming output equals the convolution of
        # the input with the closed-form LSQ slope weights, i.e. a
        # delayed, amplitude-scaled derivative
        n = 40
        fir = SlopeFIR(n, DT)
        period = 100e-6
        w = 2 * np.pi / period
        t = np.arange(400) * DT
        xs = 1e-6 * np.sin(w * t)
        out = np.array(run_filter(fir, xs))
        mid = (n - 1) / 2.0
        denom = DT * n * (n * n - 1) / 12.0
        weights = (np.arange(n) - mid) / denom
        oracle = np.convolve(xs, weights[::-1], mode="full")[:len(xs)]
        assert np.allclose(out[n:], oracle[n:], rtol=1e-9, atol=1e-12)
        # delay: output peaks (n-1)/2 samples after the true derivative
        deriv = 1e-6 * w * np.cos(w * t)
        lag = np.argmax(np.correlate(out[n:], deriv[n:], "full")) - (len(out) - n - 1)
        assert abs(-lag - mid) <= 1.0

    def test_delay_property(self):
        assert SlopeFIR(40, DT).delay == pytest.approx(19.5e-6)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=40),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_causality(self, prefix, suffix):
        # outputs over the prefix do not depend on later samples
        f1 = SlopeFIR(8, DT)
        f2 = SlopeFIR(8, DT)
        out1 = [f1.step(x) for x in prefix]
        out2 = [f2.step(x) for x in prefix + suffix][:len(prefix)]
        assert out1 == out2

    def test_window_validation(self):
        with pytest.raises(ValueError):
            SlopeFIR(1, DT)


class TestEstimatorChain:
    def test_static_atom_estimate_settles(self, maps, noise_model):
        rho_true = 6e-6
        t_clean = float(maps.transmission("hi", rho_true))
        chain = EstimatorChain(maps, "hi")
        for _ in range(200):
            rho_est, rho_dot_est = chain.step(t_clean)
        assert rho_est == pytest.approx(rho_true, abs=2e-7)
        assert rho_dot_est == pytest.approx(0.0, abs=1e-6)

    def test_above_branch_clamps_to_axis(self, maps):
        chain = EstimatorChain(maps, "hi")
        chain.step(10.0)
        for _ in range(100):
            rho_est, _ = chain.step(10.0)
        assert rho_est == pytest.approx(0.0, abs=1e-12)

    def test_level_swap_changes_lookup(self, maps):
        chain = EstimatorChain(maps, "hi")
        t_mid = float(maps.transmission("hi", 5e-6))
        for _ in range(300):
            chain.step(t_mid)
        est_hi = chain.rho_est
        chain.set_level("lo")
        rho_lo, _ = chain.step(t_mid)
        # same wire value, different table: the rho estimate jumps
        assert rho_lo != pytest.approx(est_hi, rel=1e-3)
        assert rho_lo == pytest.approx(
            float(maps.invert_transmission("lo", chain.filtered_t)), rel=1e-9)

    def test_windows_must_divide_dt(self, maps):
        with pytest.raises(ValueError, match="integer multiple"):
            EstimatorChain(maps, "hi", fir_window=40.5e-6)

    def test_nominal_delay(self, maps):
        chain = EstimatorChain(maps, "hi")
        assert chain.nominal_delay == pytest.approx(19.5e-6)

    def test_settings_defaults(self):
        s = EstimatorSettings()
        assert s.rc_cutoff == 100e3
        assert s.fir_window == 40e-6
        assert s.box_window == 10e-6
