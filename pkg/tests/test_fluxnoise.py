"""Flux-noise spectrum, kernel sampling and segment integrals."""

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from gkpsim import constants
from gkpsim.fluxnoise import (
    FreeSegmentKick,
    NoiseGrid,
    NoiseKernel,
    NoiseSignal,
    NoiseSpectrum,
    default_eval_times_ns,
    free_segment_kick,
    generate_dense_signal,
    generate_signal,
    impedance_ratio,
    integrate_alpha,
    jump_correlator,
)

SPEC = NoiseSpectrum(1.0)


def constant_signal(value, t_end_ns=1e5, n=101):
    t = np.linspace(0.0, t_end_ns, n)
    return NoiseSignal(
        times_ns=t, values=np.full(n, value), seed=None, grid_note="test"
    )


class TestSpectrum:
    def test_validation(self):
        with pytest.raises(ValueError, match="nonnegative"):
            NoiseSpectrum(-1.0)
        with pytest.raises(ValueError, match="cutoffs"):
            NoiseSpectrum(1.0, omega_ir=0.0)
        with pytest.raises(ValueError, match="cutoffs"):
            NoiseSpectrum(1.0, omega_ir=1.0, omega_uv=0.5)

    def test_shape_even_and_peaked(self):
        w = np.array([1e-3, 1.0, 1e4])
        assert np.array_equal(SPEC.j_tilde(w), SPEC.j_tilde(-w))
        val = SPEC.j_tilde(0.0)
        assert abs(val - SPEC.omega_ref / SPEC.omega_ir) < 1e-9 * val
        assert np.all(np.diff(SPEC.j_tilde(np.logspace(-5, 7, 40))) < 0.0)

    def test_variance_target_closed_form(self):
        # int_0^infty e^{-w/uv}/(w+ir) dw = e^{ir/uv} E1(ir/uv).
        x = SPEC.omega_ir / SPEC.omega_uv
        closed = SPEC.omega_ref * np.exp(x) * scipy.special.exp1(x)
        want = 1e-12 * closed / (2.0 * np.pi)
        assert abs(SPEC.variance_target() / want - 1.0) < 1e-9

    def test_variance_scales_linearly(self):
        assert abs(
            NoiseSpectrum(4.0).variance_target() / SPEC.variance_target() - 4.0
        ) < 1e-12


class TestJumpCorrelator:
    def test_even_and_real(self):
        t = np.array([1e-8, 1e-6, 1e-3, 0.5])
        fwd = jump_correlator(t, SPEC)
        bwd = jump_correlator(-t, SPEC)
        assert np.all(np.abs(fwd - bwd) <= 1e-12 * np.abs(fwd))
        assert np.isrealobj(fwd)

    def test_against_quadrature(self):
        # Oscillatory tail handled by the cos-weighted rule; the head is
        # smooth enough for plain adaptive quadrature.
        def oracle(t):
            f = lambda w: np.sqrt(SPEC.j_tilde(w))
            head, _ = scipy.integrate.quad(
                lambda w: f(w) * np.cos(w * t), 0.0, 1.0, epsabs=1e-13, limit=800
            )
            tail, _ = scipy.integrate.quad(
                f, 1.0, np.inf, weight="cos", wvar=t, limit=2000
            )
            return np.sqrt(2.0 / np.pi) * (head + tail)

        for t in (1e-7, 1e-5, 1e-3, 1e-1):
            want = oracle(t)
            assert abs(jump_correlator(t, SPEC) / want - 1.0) < 1e-6

    def test_parseval(self):
        # Summing g^2 over the full two-piece grid recovers the one-sided
        # spectral integral; the guard-band truncation costs about 1.5%.
        grid = NoiseGrid.build(SPEC, window_s=1.0)
        total = float(
            np.sum(jump_correlator(grid.times, SPEC) ** 2 * grid.weights)
        )
        x = SPEC.omega_ir / SPEC.omega_uv
        target = SPEC.omega_ref * np.exp(x) * scipy.special.exp1(x)
        assert abs(total / target - 1.0) < 0.02


class TestNoiseGrid:
    def test_layout(self):
        grid = NoiseGrid.build(SPEC)
        assert grid.dt_a == 0.5 / SPEC.omega_uv
        assert grid.times_a[0] == 0.0
        assert grid.times_b[0] >= grid.times_a[-1] + grid.dt_b
        assert grid.coverage_s > 0.99 / SPEC.omega_ir
        assert grid.weights.size == grid.size
        assert grid.weights[0] == 0.5 * grid.dt_a

    def test_window_validation(self):
        with pytest.raises(ValueError, match="positive"):
            NoiseGrid.build(SPEC, window_s=0.0)
        with pytest.raises(ValueError, match="coarse"):
            NoiseGrid.build(SPEC, window_s=2.0 / SPEC.omega_ir)


class TestSampling:
    def test_zero_strength(self):
        sig = generate_signal(NoiseSpectrum(0.0), seed=5)
        assert np.all(sig.values == 0.0)
        assert sig(0.0) == 0.0

    def test_deterministic(self):
        a = generate_signal(SPEC, seed=(3, 7))
        b = generate_signal(SPEC, seed=(3, 7))
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, generate_signal(SPEC, seed=(3, 8)).values)

    def test_strength_rescales_shared_kernel(self):
        # The cached kernel is strength-independent; quadrupling gamma_phi
        # doubles the same realization bit for bit.
        weak = generate_signal(SPEC, seed=9)
        strong = generate_signal(NoiseSpectrum(4.0), seed=9)
        assert np.array_equal(strong.values, 2.0 * weak.values)

    def test_coverage_errors(self):
        sig = generate_signal(SPEC, seed=0)
        with pytest.raises(ValueError, match="window"):
            sig(-5.0)
        with pytest.raises(ValueError, match="window"):
            sig(1.1e5)
        with pytest.raises(ValueError, match="window"):
            sig.integral_ns(0.0, 2e5)

    def test_kernel_validation(self):
        grid = NoiseGrid.build(SPEC)
        with pytest.raises(ValueError, match="two evaluation"):
            NoiseKernel(SPEC, grid, np.array([0.0]))
        with pytest.raises(ValueError, match="ascend"):
            NoiseKernel(SPEC, grid, np.array([0.0, 2.0, 1.0]))
        with pytest.raises(ValueError, match="coverage"):
            NoiseKernel(SPEC, grid, np.array([0.0, 2e13]))

    def test_lag_zero_expectation(self):
        # t = 0 sees only half the kernel mass; interior points sit within
        # a few percent of the stationary variance.
        grid = NoiseGrid.build(SPEC)
        kern = NoiseKernel(SPEC, grid, default_eval_times_ns())
        ratio = kern.lag_zero_expectation() / SPEC.variance_target()
        assert 0.65 < ratio[0] < 0.75
        assert np.all(ratio[1:] > 0.78)
        assert np.all(ratio[1:] < 1.06)
        assert abs(ratio.mean() - 1.0) < 0.05

    def test_monte_carlo_variance(self):
        grid = NoiseGrid.build(SPEC)
        kern = NoiseKernel(SPEC, grid, default_eval_times_ns())
        acc = np.zeros_like(kern.times_ns)
        n = 400
        for s in range(n):
            acc += kern.sample((11, s)).values ** 2
        ratio = (acc[1:] / n).mean() / SPEC.variance_target()
        assert abs(ratio - 1.0) < 0.05


class TestDenseSignal:
    def test_matches_direct_kernel(self):
        # The FFT decimation and the anchor-upsampled drift must agree
        # with the exact kernel contraction on the same weight vector.
        window, dt = 0.25, 2e-6
        times_s, values = generate_dense_signal(SPEC, 42, window, dt)
        assert times_s.size == 125001
        idx = [0, 1000, 31250, 62500, 125000]
        grid = NoiseGrid.build(SPEC, window_s=window)
        direct = NoiseKernel(SPEC, grid, times_s[idx] * 1e9).sample(42)
        rel = np.abs(values[idx] - direct.values) / np.abs(direct.values)
        assert rel.max() < 1e-9

    def test_spacing_validation(self):
        with pytest.raises(ValueError, match="multiple"):
            generate_dense_signal(SPEC, 0, 1e-3, 3e-7)
        with pytest.raises(ValueError, match="multiple"):
            generate_dense_signal(SPEC, 0, 1e-3, 2.5e-7)


class TestSegmentIntegrals:
    def test_alpha_constant_signal(self):
        sig = constant_signal(2.5e-6)
        eps_l = constants.inductive_energy(2.5)
        want = 4.0 * np.pi * eps_l * 2.5e-6 * 400.0
        got = integrate_alpha(sig, 100.0, 500.0, eps_l)
        assert abs(got / want - 1.0) < 1e-12

    def test_alpha_zero_and_additive(self):
        assert integrate_alpha(constant_signal(0.0), 0.0, 100.0, 1.0) == 0.0
        sig = generate_signal(SPEC, seed=21)
        whole = integrate_alpha(sig, 0.0, 9e4, 1.0)
        split = integrate_alpha(sig, 0.0, 4e4, 1.0) + integrate_alpha(
            sig, 4e4, 9e4, 1.0
        )
        assert abs(whole - split) < 1e-10 * abs(whole)
        with pytest.raises(ValueError, match="forward"):
            integrate_alpha(sig, 10.0, 5.0, 1.0)

    def test_impedance_ratio_matched(self):
        l_uh = 2.5
        c_ff = l_uh * 1e-6 / constants.R_LC**2 * 1e15
        assert abs(impedance_ratio(l_uh, c_ff) - 2.0) < 1e-12

    def test_kick_zero_signal(self):
        kick = free_segment_kick(constant_signal(0.0), 10.0, 1.0, 2.5, 15.0)
        assert kick == FreeSegmentKick(0.0, 0.0, 0.0)

    def test_kick_full_period_cancels(self):
        l_uh, c_ff = 2.5, 15.0
        period = 1.0 / constants.lc_frequency(l_uh, c_ff)
        kick = free_segment_kick(constant_signal(1e-6), 50.0, period, l_uh, c_ff)
        scale = constants.inductive_energy(l_uh) * 1e-6 * period
        assert abs(kick.a) < 1e-10 * scale
        assert abs(kick.b) < 1e-10 * scale

    def test_kick_quarter_period_closed_form(self):
        l_uh, c_ff, xi = 2.5, 15.0, 3e-6
        f_lc = constants.lc_frequency(l_uh, c_ff)
        eps_l = constants.inductive_energy(l_uh)
        nu = impedance_ratio(l_uh, c_ff)
        kick = free_segment_kick(
            constant_signal(xi), 0.0, 0.25 / f_lc, l_uh, c_ff
        )
        assert abs(kick.a - nu * eps_l * xi / f_lc) < 1e-12 * abs(kick.a)
        assert abs(kick.b - 2.0 * eps_l * xi / f_lc) < 1e-12 * abs(kick.b)
        assert abs(kick.phase - kick.a * kick.b / (2.0 * np.pi)) < 1e-18

    def test_kick_validation(self):
        with pytest.raises(ValueError, match="forward"):
            free_segment_kick(constant_signal(0.0), 0.0, -1.0, 2.5, 15.0)
