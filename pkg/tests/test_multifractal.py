import numpy as np
import pytest

from mfxdma.dma import DmaError, HurstCurve
from mfxdma.multifractal import (joint_spectrum, mass_exponents,
                                 singularity_strength, singularity_width,
                                 spectrum, tau_nonlinearity_test)
from mfxdma.synth import analytic_cascade_tau

Q = np.round(np.arange(-20, 21) * 0.25, 10)


def _curve(h_values):
    h = np.asarray(h_values, dtype=np.float64)
    return HurstCurve(q_grid=Q, h=h, stderr=np.zeros_like(h), r2=np.ones_like(h))


class TestMassExponents:
    def test_q0_forced(self):
        tau = mass_exponents(_curve(np.linspace(0.9, 0.2, Q.size)))
        assert tau[np.nonzero(Q == 0.0)[0][0]] == -1.0

    def test_q2_h_half(self):
        tau = mass_exponents(_curve(np.full(Q.size, 0.5)))
        assert tau[np.nonzero(Q == 2.0)[0][0]] == pytest.approx(0.0, abs=1e-15)

    def test_constant_h_gives_line(self):
        tau = mass_exponents(_curve(np.full(Q.size, 0.3668)))
        np.testing.assert_allclose(tau, 0.3668 * Q - 1.0, atol=1e-14)


class TestSingularityStrength:
    def test_linear_tau(self):
        alpha = singularity_strength(Q, 0.5 * Q - 1.0)
        np.testing.assert_allclose(alpha, 0.5, atol=1e-13)

    def test_quadratic_exact(self):
        tau = -1.0 + 0.4 * Q - 0.01 * Q ** 2
        alpha = singularity_strength(Q, tau)
        np.testing.assert_allclose(alpha, 0.4 - 0.02 * Q, atol=1e-12)

    def test_cascade_analytic_derivative(self):
        p = 0.3
        tau = analytic_cascade_tau(Q, p)
        alpha = singularity_strength(Q, tau)
        # closed-form derivative of -log2(p^q + (1-p)^q)
        num = p ** Q * np.log2(p) + (1 - p) ** Q * np.log2(1 - p)
        expected = -num / (p ** Q + (1 - p) ** Q)
        assert np.max(np.abs(alpha - expected)) < 1e-3

    def test_too_few_points(self):
        with pytest.raises(DmaError):
            singularity_strength(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


class TestSpectrum:
    def test_q0_forces_unit_f(self):
        h = np.linspace(0.8, 0.3, Q.size)
        tau = Q * h - 1.0
        alpha = singularity_strength(Q, tau)
        f = spectrum(Q, alpha, tau)
        assert f[np.nonzero(Q == 0.0)[0][0]] == pytest.approx(1.0, abs=1e-12)

    def test_monofractal_f_is_one(self):
        tau = 0.62 * Q - 1.0
        alpha = singularity_strength(Q, tau)
        f = spectrum(Q, alpha, tau)
        np.testing.assert_allclose(f, 1.0, atol=1e-12)

    def test_cascade_max_f_is_one(self):
        tau = analytic_cascade_tau(Q, 0.3)
        alpha = singularity_strength(Q, tau)
        f = spectrum(Q, alpha, tau)
        assert abs(f.max() - 1.0) < 1e-6


class TestSingularityWidth:
    def test_constant_alpha(self):
        assert singularity_width(np.full(7, 0.44)) == 0.0

    def test_simple_range(self):
        assert singularity_width(np.array([0.3, 0.5, 0.4])) == pytest.approx(0.2)

    def test_empty(self):
        with pytest.raises(DmaError):
            singularity_width(np.array([]))


class TestJointSpectrum:
    def test_identities_hold(self):
        rng = np.random.default_rng(41)
        h = 0.5 + 0.3 / (1.0 + np.exp(Q)) + 0.01 * rng.standard_normal(Q.size)
        result = joint_spectrum(_curve(h))
        np.testing.assert_allclose(result.tau, Q * h - 1.0, atol=1e-12)
        np.testing.assert_allclose(result.f_alpha,
                                   Q * result.alpha - result.tau, atol=1e-12)
        assert result.delta_alpha == pytest.approx(
            result.alpha.max() - result.alpha.min(), abs=1e-15)


class TestTauNonlinearityTest:
    def test_exact_linear_not_flagged(self):
        report = tau_nonlinearity_test(Q, 0.41 * Q - 1.0, 0.05)
        assert abs(report.fit.coefficients[2]) < 1e-10
        assert not report.multifractal_flag

    def test_positive_curvature_not_flagged(self):
        # significant but positive quadratic term counts against
        tau = -1.0 + 0.3668 * Q + 0.0013 * Q ** 2
        report = tau_nonlinearity_test(Q, tau, 0.05)
        assert report.fit.coefficients[2] == pytest.approx(0.0013, abs=1e-12)
        assert not report.multifractal_flag

    def test_negative_curvature_flagged(self):
        tau = -1.0 + 0.3359 * Q - 0.0107 * Q ** 2
        report = tau_nonlinearity_test(Q, tau, 0.05)
        assert report.fit.coefficients[2] == pytest.approx(-0.0107, abs=1e-12)
        assert report.multifractal_flag

    def test_insignificant_negative_curvature_not_flagged(self):
        rng = np.random.default_rng(42)
        # noise swamps a whisper of curvature
        tau = 0.4 * Q - 1.0 - 1e-5 * Q ** 2 + 0.5 * rng.standard_normal(Q.size)
        report = tau_nonlinearity_test(Q, tau, 0.05)
        if report.fit.coefficients[2] < 0:
            assert report.fit.t_pvalues[2] > 0.05
        assert not report.multifractal_flag

    def test_too_few_points(self):
        with pytest.raises(DmaError):
            tau_nonlinearity_test(np.arange(4.0), np.arange(4.0), 0.05)
