"""Moment matching, blend weights, and the blended censored log-likelihood."""
import numpy as np
import pytest
from scipy import stats as sps

from mixnoise.errors import ConfigurationError
from mixnoise.likelihood import (
    LOG_2PI,
    LikelihoodBlend,
    NoiseModel,
    additive_moments,
    blend_weight,
    blended_channel_terms,
    log_likelihood_channel,
    log_likelihood_total,
    multiplicative_moments,
    regime_moments,
    smoothstep_Q,
)
from mixnoise.priors import ValidityBox
from mixnoise.targets import make_synthetic_surrogate

from conftest import central_diff


def draw_model(f, sigma_a, sigma_m, n, rng):
    eps_m = rng.lognormal(-0.5 * sigma_m**2, sigma_m, n) if sigma_m > 0 else np.ones(n)
    eps_a = rng.normal(0, sigma_a, n) if sigma_a > 0 else np.zeros(n)
    return eps_m * f + eps_a


class TestAdditiveMoments:
    def test_zero_forward_limit(self):
        _, s = additive_moments(0.0, NoiseModel(0.5, 0.3, 0.0))
        assert s == pytest.approx(0.25, abs=0)

    def test_zero_multiplicative_noise(self):
        _, s = additive_moments(1.0, NoiseModel(0.5, 0.0, 0.0))
        assert s == pytest.approx(0.25, abs=0)

    def test_frozen_value(self):
        # expm1(0.1) + 0.25, from the stated noise levels
        _, s = additive_moments(1.0, NoiseModel(0.5, np.sqrt(0.1), 0.0))
        assert s == pytest.approx(0.355171, abs=5e-7)
        assert s == pytest.approx(0.3551709180756476, rel=1e-12)

    def test_matches_monte_carlo_variance(self, rng):
        f, sa, sm = 1.0, 0.5, np.sqrt(0.1)
        y = draw_model(f, sa, sm, 10**7, rng)
        _, s = additive_moments(f, NoiseModel(sa, sm, 0.0))
        assert s == pytest.approx(y.var(), rel=1e-2)

    def test_mean_is_forward_value(self):
        m, _ = additive_moments(3.7, NoiseModel(0.5, 0.2, 0.0))
        assert m == 0.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            additive_moments(np.inf, NoiseModel(0.5, 0.2, 0.0))


class TestMultiplicativeMoments:
    def test_no_additive_noise(self):
        m, s2 = multiplicative_moments(2.5, NoiseModel(0.0, 0.3, 0.0))
        assert m == pytest.approx(-0.045, abs=1e-15)
        assert s2 == pytest.approx(0.09, abs=1e-15)

    def test_tiny_multiplicative_noise(self):
        m, _ = multiplicative_moments(1.0, NoiseModel(1.0, 1e-12, 0.0))
        assert m == pytest.approx(-0.5 * np.log(2.0), rel=1e-9)

    def test_unit_mean_error(self, rng):
        for _ in range(50):
            f = 10 ** rng.uniform(-3, 3)
            noise = NoiseModel(10 ** rng.uniform(-2, 1), rng.uniform(0.01, 1.0), 0.0)
            m, s2 = multiplicative_moments(f, noise)
            assert np.exp(m + 0.5 * s2) == pytest.approx(1.0, rel=1e-14)

    def test_moment_match_monte_carlo(self, rng):
        f, sm, sa = 10.0, np.log(1.1), 0.5
        m, s2 = multiplicative_moments(f, NoiseModel(sa, sm, 0.0))
        # surrogate: y ~ logN(log f + m, s2)
        mean_sur = np.exp(np.log(f) + m + 0.5 * s2)
        var_sur = (np.exp(s2) - 1.0) * mean_sur**2
        y = draw_model(f, sa, sm, 10**7, rng)
        assert mean_sur == pytest.approx(y.mean(), rel=1e-2)
        assert var_sur == pytest.approx(y.var(), rel=1e-2)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            multiplicative_moments(0.0, NoiseModel(0.5, 0.2, 0.0))

    def test_regime_moments_combined(self):
        rm = regime_moments(2.0, NoiseModel(0.5, 0.3, 0.0))
        assert rm.s_m2 == -2.0 * rm.m_m
        assert rm.s_a2 >= 0.25


class TestSmoothstep:
    def test_endpoints(self):
        assert smoothstep_Q(0.0) == 0.0
        assert smoothstep_Q(1.0) == 1.0

    def test_midpoint(self):
        assert smoothstep_Q(0.5) == pytest.approx(0.5, abs=1e-15)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            smoothstep_Q(1.5)
        with pytest.raises(ValueError):
            smoothstep_Q(-0.1)


class TestBlendWeight:
    def test_low_regime(self):
        lam, d1, d2 = blend_weight(-2.0, -1.0, 1.0)
        assert (lam, d1, d2) == (0.0, 0.0, 0.0)

    def test_high_regime(self):
        lam, d1, d2 = blend_weight(2.0, -1.0, 1.0)
        assert (lam, d1, d2) == (1.0, 0.0, 0.0)

    def test_midpoint(self):
        lam, _, _ = blend_weight(0.0, -1.0, 1.0)
        assert lam == pytest.approx(0.5, abs=1e-15)

    def test_bad_thresholds(self):
        with pytest.raises(ConfigurationError):
            blend_weight(0.0, 1.0, 1.0)

    def test_continuity_at_thresholds(self):
        a0, a1 = -0.7, 1.3
        eps = 1e-12
        for edge in (a0, a1):
            below = np.array(blend_weight(edge - eps, a0, a1))
            above = np.array(blend_weight(edge + eps, a0, a1))
            assert np.all(np.abs(below - above) < 1e-6)

    def test_derivatives_match_finite_differences(self, rng):
        a0, a1 = -1.0, 2.0
        for z in rng.uniform(-0.9, 1.9, 30):
            lam, d1, d2 = blend_weight(z, a0, a1)
            h = 1e-6
            lp = blend_weight(z + h, a0, a1)[0]
            lm = blend_weight(z - h, a0, a1)[0]
            assert (lp - lm) / (2 * h) == pytest.approx(d1, rel=1e-5, abs=1e-8)
            h = 1e-4  # second differences need a larger step for conditioning
            lp = blend_weight(z + h, a0, a1)[0]
            lm = blend_weight(z - h, a0, a1)[0]
            assert (lp - 2 * lam + lm) / h**2 == pytest.approx(d2, rel=1e-3, abs=1e-4)


NOISE = NoiseModel(sigma_a=0.5, sigma_m=np.log(1.1), omega=0.9)


class TestChannelLikelihood:
    def test_pure_additive_matches_gaussian(self):
        # lam = 0 everywhere: exact Gaussian log-density
        y, z = 2.0, 0.3
        f = np.exp(z)
        _, s = additive_moments(f, NOISE)
        val, _, _ = log_likelihood_channel(y, 0, z, np.zeros(2), np.zeros(2), NOISE, (5.0, 6.0))
        expected = -0.5 * (LOG_2PI + np.log(s)) - (y - f) ** 2 / (2 * s)
        assert val == expected  # same branch, same arithmetic

    def test_pure_multiplicative_censored(self):
        z = 0.4
        f = np.exp(z)
        m, s2 = multiplicative_moments(f, NOISE)
        val, _, _ = log_likelihood_channel(0.0, 1, z, np.zeros(1), np.zeros(1), NOISE, (-3.0, -2.0))
        expected = sps.norm.logcdf((np.log(NOISE.omega) - (z + m)) / np.sqrt(s2))
        assert val == pytest.approx(expected, rel=1e-12)

    def test_zero_observation_in_multiplicative_regime(self):
        val, grad, hess = log_likelihood_channel(-0.2, 0, 0.4, np.ones(2), np.ones(2), NOISE, (-3.0, -2.0))
        assert val == -np.inf
        assert np.all(grad == 0.0) and np.all(hess == 0.0)

    def test_gradient_matches_finite_differences(self, rng):
        # 20 random points spanning all three regimes, chain-ruled through a
        # random affine forward map
        a0, a1 = -1.0, 1.5
        for _ in range(20):
            z = rng.uniform(-3, 3)
            c = int(rng.random() < 0.5)
            y = 0.0 if c else float(abs(draw_model(np.exp(z), NOISE.sigma_a, NOISE.sigma_m, 1, rng)[0]) + 1e-3)
            w = rng.normal(size=3)
            b = rng.normal()

            def value_at(th):
                zz = float(w @ th + b)
                return log_likelihood_channel(y, c, zz, w, np.zeros(3), NOISE, (a0, a1))[0]

            theta = rng.normal(size=3) * 0.1
            z0 = float(w @ theta + b)
            val, grad, _ = log_likelihood_channel(y, c, z0, w, np.zeros(3), NOISE, (a0, a1))
            fd = central_diff(value_at, theta, 1e-6)
            assert np.allclose(grad, fd, rtol=1e-4, atol=1e-7)


def make_test_forward(rng, dim=3, channels=4):
    box = ValidityBox(-np.ones(dim), np.ones(dim))
    return make_synthetic_surrogate(dim, channels, (-2.0, 1.0), rng, box=box, degree=3)


class TestTotalLikelihood:
    def test_single_channel_reduces(self, rng):
        fm = make_test_forward(rng, channels=1)
        theta = rng.uniform(-0.5, 0.5, 3)
        z, dz, d2z = fm.log_values_and_derivatives(theta[None, :])
        blend = LikelihoodBlend.uniform(-1.0, 1.0, 1)
        total = log_likelihood_total(theta, [1.2], [0], fm, NOISE, blend)
        single = log_likelihood_channel(1.2, 0, z[0, 0], dz[0, 0], d2z[0, 0], NOISE, (-1.0, 1.0))
        assert total[0] == pytest.approx(single[0], rel=1e-14)
        assert np.allclose(total[1], single[1])

    def test_all_censored_additive_closed_form(self, rng):
        fm = make_test_forward(rng)
        theta = rng.uniform(-0.5, 0.5, 3)
        z = fm.log_values(theta[None, :])[0]
        blend = LikelihoodBlend.uniform(50.0, 51.0, 4)  # lam = 0 everywhere
        val, _, _ = log_likelihood_total(theta, np.zeros(4), np.ones(4), fm, NOISE, blend)
        f = np.exp(z)
        _, s = additive_moments(f, NOISE)
        expected = sps.norm.logcdf((NOISE.omega - f) / np.sqrt(s)).sum()
        assert val == pytest.approx(expected, rel=1e-10)

    def test_gradient_matches_finite_differences(self, rng):
        fm = make_test_forward(rng)
        blend = LikelihoodBlend(np.array([[-2.0, 0.0], [-1.0, 1.5], [0.0, 0.5], [-3.0, 3.0]]))
        y = np.array([0.8, 0.0, 2.0, 0.0])
        c = np.array([0, 1, 0, 1])
        for _ in range(10):
            theta = rng.uniform(-0.6, 0.6, 3)
            _, grad, _ = log_likelihood_total(theta, y, c, fm, NOISE, blend)
            fd = central_diff(lambda th: log_likelihood_total(th, y, c, fm, NOISE, blend)[0], theta, 1e-6)
            assert np.allclose(grad, fd, rtol=1e-4, atol=1e-6)


class TestInvariants:
    @pytest.mark.parametrize("f,sa,sm", [(1e-3, 0.5, 0.3), (1.0, 0.1, 0.5), (31.6, 2.0, 0.2), (1e3, 5.0, 0.4)])
    def test_moment_fidelity(self, f, sa, sm, rng):
        n = 10**7
        y = draw_model(f, sa, sm, n, rng)
        m_a, s_a2 = additive_moments(f, NoiseModel(sa, sm, 0.0))
        mean_se = y.std() / np.sqrt(n)
        assert abs((f + m_a) - y.mean()) < 3 * mean_se
        m4 = np.mean((y - y.mean()) ** 4)
        var_se = np.sqrt(max(m4 - y.var() ** 2, 0.0) / n)
        assert abs(s_a2 - y.var()) < 3 * var_se

    def test_gradient_and_hessian_sweep(self, rng):
        # >= 100 random points across all three regimes
        fm = make_test_forward(rng)
        blend = LikelihoodBlend(np.array([[-2.0, 0.0], [-1.0, 1.5], [0.0, 0.5], [-3.0, 3.0]]))
        checked = 0
        while checked < 100:
            theta = rng.uniform(-0.8, 0.8, 3)
            c = (rng.random(4) < 0.4).astype(int)
            f = np.exp(fm.log_values(theta[None, :])[0])
            y = np.where(c, 0.0, np.abs(f * rng.lognormal(0, 0.2, 4) + rng.normal(0, 0.3, 4)) + 1e-6)
            val, grad, hess = log_likelihood_total(theta, y, c, fm, NOISE, blend)
            if not np.isfinite(val):
                continue
            fd_g = central_diff(lambda th: log_likelihood_total(th, y, c, fm, NOISE, blend)[0], theta, 1e-6)
            assert np.allclose(grad, fd_g, rtol=1e-4, atol=1e-6)
            fd_h = np.zeros(3)
            for i in range(3):
                h = 2e-4 * (1 + abs(theta[i]))
                up = theta.copy()
                up[i] += h
                dn = theta.copy()
                dn[i] -= h
                vp = log_likelihood_total(up, y, c, fm, NOISE, blend)[0]
                vm = log_likelihood_total(dn, y, c, fm, NOISE, blend)[0]
                fd_h[i] = (vp - 2 * val + vm) / h**2
            assert np.allclose(hess, fd_h, rtol=1e-3, atol=5e-4)
            checked += 1

    def test_regime_degeneracy_bitwise(self, rng):
        fm = make_test_forward(rng)
        theta = rng.uniform(-0.5, 0.5, 3)
        y = np.array([0.5, 1.0, 0.0, 2.0])
        c = np.array([0, 0, 1, 0])
        # two different all-additive blends must agree bitwise
        lo1 = log_likelihood_total(theta, y, c, fm, NOISE, LikelihoodBlend.uniform(40.0, 41.0, 4))
        lo2 = log_likelihood_total(theta, y, c, fm, NOISE, LikelihoodBlend.uniform(90.0, 99.0, 4))
        assert lo1[0] == lo2[0] and np.all(lo1[1] == lo2[1]) and np.all(lo1[2] == lo2[2])
        # and two all-multiplicative blends likewise
        hi1 = log_likelihood_total(theta, y, c, fm, NOISE, LikelihoodBlend.uniform(-41.0, -40.0, 4))
        hi2 = log_likelihood_total(theta, y, c, fm, NOISE, LikelihoodBlend.uniform(-99.0, -90.0, 4))
        assert hi1[0] == hi2[0] and np.all(hi1[1] == hi2[1])
        # closed forms
        z = fm.log_values(theta[None, :])[0]
        f = np.exp(z)
        _, s = additive_moments(f, NOISE)
        gauss = np.where(
            c, sps.norm.logcdf((NOISE.omega - f) / np.sqrt(s)), sps.norm.logpdf(y, loc=f, scale=np.sqrt(s))
        ).sum()
        assert lo1[0] == pytest.approx(gauss, rel=1e-12)
        m, s2 = multiplicative_moments(f, NOISE)
        y_safe = np.where(y > 0, y, 1.0)
        logn = np.where(
            c,
            sps.norm.logcdf((np.log(NOISE.omega) - (z + m)) / np.sqrt(s2)),
            sps.norm.logpdf(np.log(y_safe), loc=z + m, scale=np.sqrt(s2)) - np.log(y_safe),
        ).sum()
        assert hi1[0] == pytest.approx(logn, rel=1e-12)

    def test_degenerate_variances_raise(self):
        from mixnoise.errors import NumericalError

        with pytest.raises(NumericalError):
            blended_channel_terms(1.0, 0, 0.0, NoiseModel(0.0, 0.0, 0.0), -1.0, 1.0)

    def test_deep_censored_tail_stays_finite(self):
        # censored channel with the forward value hundreds of log units above
        # the sensitivity limit: log CDF must stay finite and negative
        noise = NoiseModel(sigma_a=1e-10, sigma_m=np.log(1.1), omega=3e-10)
        terms = blended_channel_terms(3e-10, 1, 5.0, noise, -25.0, -20.0)
        assert np.isfinite(terms.value) and terms.value < -1e4


class TestBlendContainer:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            LikelihoodBlend(np.array([[1.0, 0.5]]))

    def test_uniform_builder(self):
        b = LikelihoodBlend.uniform(-1.0, 1.0, 5)
        assert b.n_channels == 5
        assert np.all(b.a[:, 0] == -1.0)
