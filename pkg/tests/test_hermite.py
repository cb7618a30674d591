"""Squared-polynomial error distributions against quadrature oracles."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import norm

from knpchoice import HermiteDistribution, normal_moments, partial_moments
from knpchoice.hermite import MAX_ORDER, density_from_coefficients

TAUS = [
    (),
    (0.5,),
    (0.3, -0.2),
    (-0.8, 0.1, 0.4),
    (0.0, 0.0, 0.0, 1.2),
    (0.2, -0.1, 0.05, -0.3, 0.15, 0.07),
]


def quad_cdf(dist, u):
    """Oracle CDF: integrate the density over [-14, u], split at zero.

    Densities here are polynomials of order <= 12 times phi, whose mass
    beyond +-14 is under 1e-18; the narrow window keeps QUADPACK's error
    estimate honest.
    """
    hi = min(u, 14.0)
    if hi <= -14.0:
        return 0.0
    total = 0.0
    for a, b in ((-14.0, min(hi, 0.0)), (0.0, hi)):
        if b > a:
            val, err = quad(dist.density, a, b, limit=300, epsabs=1e-13, epsrel=1e-12)
            assert err < 2e-10  # comparisons below use abs=1e-9
            total += val
    return total


class TestDensityOracle:
    @pytest.mark.parametrize("tau", TAUS)
    def test_integrates_to_one(self, tau):
        dist = HermiteDistribution(tau)
        lo, _ = quad(dist.density, -14.0, 0.0, limit=300, epsabs=1e-13, epsrel=1e-12)
        hi, _ = quad(dist.density, 0.0, 14.0, limit=300, epsabs=1e-13, epsrel=1e-12)
        assert lo + hi == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("tau", TAUS)
    def test_matches_definition(self, tau):
        # density = (1 + sum_s tau_s u^s)^2 phi(u) / psi with psi from moments
        dist = HermiteDistribution(tau)
        coefs = np.concatenate([[1.0], tau])
        integrand = lambda z: np.polyval(coefs[::-1], z) ** 2 * norm.pdf(z)
        psi_oracle = (
            quad(integrand, -40.0, 0.0, limit=300)[0]
            + quad(integrand, 0.0, 40.0, limit=300)[0]
        )
        u = np.linspace(-5, 5, 41)
        direct = np.polyval(coefs[::-1], u) ** 2 * norm.pdf(u) / psi_oracle
        np.testing.assert_allclose(dist.density(u), direct, rtol=1e-9, atol=1e-12)

    def test_nonnegative_under_extreme_coefficients(self):
        rng = np.random.default_rng(11)
        u = rng.uniform(-45, 45, 500)
        for _ in range(25):
            tau = rng.uniform(-3, 3, rng.integers(1, MAX_ORDER + 1))
            assert np.all(HermiteDistribution(tau).density(u) >= 0.0)


class TestCdfOracle:
    @pytest.mark.parametrize("tau", TAUS)
    def test_matches_quadrature(self, tau):
        dist = HermiteDistribution(tau)
        for u in (-4.2, -1.0, -0.1, 0.0, 0.7, 2.5, 5.0):
            assert dist.cdf(u) == pytest.approx(quad_cdf(dist, u), abs=1e-9)

    @pytest.mark.parametrize("tau", TAUS)
    def test_monotone_and_bounded(self, tau):
        dist = HermiteDistribution(tau)
        u = np.linspace(-40, 40, 2001)
        vals = dist.cdf(u)
        assert np.all(np.diff(vals) >= -1e-10)
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    @pytest.mark.parametrize("tau", TAUS)
    def test_tail_limits_exact(self, tau):
        dist = HermiteDistribution(tau)
        assert dist.cdf(-39.0) == 0.0
        assert dist.cdf(39.0) == 1.0
        assert dist.cdf(-1e30) == 0.0
        assert dist.cdf(1e30) == 1.0

    def test_zero_tau_is_standard_normal(self):
        dist = HermiteDistribution(np.zeros(3))
        u = np.linspace(-8, 8, 101)
        np.testing.assert_allclose(dist.cdf(u), ndtr(u), rtol=0, atol=1e-13)
        np.testing.assert_allclose(dist.density(u), norm.pdf(u), rtol=1e-13, atol=0)


class TestGradient:
    @pytest.mark.parametrize("tau", [t for t in TAUS if t])
    def test_against_central_differences(self, tau):
        tau = np.asarray(tau, dtype=float)
        u = np.array([-2.3, -0.4, 0.0, 0.9, 3.1])
        res = HermiteDistribution(tau).evaluate(u, need_grad=True)
        h = 1e-6
        for s in range(tau.size):
            bump = np.zeros_like(tau)
            bump[s] = h
            hi = HermiteDistribution(tau + bump).cdf(u)
            lo = HermiteDistribution(tau - bump).cdf(u)
            fd = (hi - lo) / (2 * h)
            np.testing.assert_allclose(
                res.grad_tau[:, s], fd, rtol=2e-6, atol=2e-8
            ), f"s={s}"

    def test_known_value_at_origin(self):
        # d/dtau1 F(0; tau)|_{tau=0} = -2 phi(0)
        res = HermiteDistribution((0.0,)).evaluate(np.array([0.0]), need_grad=True)
        assert res.grad_tau[0, 0] == pytest.approx(-2 * norm.pdf(0.0), abs=1e-14)

    def test_gradient_vanishes_in_tails(self):
        res = HermiteDistribution((0.4, -0.2)).evaluate(
            np.array([-45.0, 45.0]), need_grad=True
        )
        np.testing.assert_array_equal(res.grad_tau, np.zeros((2, 2)))

    def test_evaluate_consistency_with_scalar_paths(self):
        dist = HermiteDistribution((0.25, -0.15, 0.05))
        u = np.linspace(-4, 4, 17)
        res = dist.evaluate(u, need_grad=False)
        np.testing.assert_array_equal(res.cdf, dist.cdf(u))
        np.testing.assert_array_equal(res.density, dist.density(u))
        assert res.grad_tau is None


class TestMoments:
    def test_partial_moments_scalar_and_array_agree(self):
        u = np.array([-1.5, 0.2, 2.0])
        mat = partial_moments(u, 5)
        for i, ui in enumerate(u):
            np.testing.assert_array_equal(partial_moments(float(ui), 5), mat[i])

    def test_full_range_limit(self):
        np.testing.assert_array_equal(partial_moments(60.0, 6), normal_moments(6))


class TestConstruction:
    def test_rejects_too_many_terms(self):
        with pytest.raises(ValueError):
            HermiteDistribution(np.zeros(MAX_ORDER + 1))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            HermiteDistribution((0.1, np.nan))
        with pytest.raises(ValueError):
            HermiteDistribution((np.inf,))

    def test_density_from_coefficients_scale_invariant(self):
        coefs = np.array([2.0, -0.8, 0.6])
        u = np.linspace(-4, 4, 33)
        np.testing.assert_allclose(
            density_from_coefficients(u, coefs),
            density_from_coefficients(u, 3.7 * coefs),
            rtol=1e-12,
        )

    def test_density_from_coefficients_rejects_zero(self):
        with pytest.raises(ValueError):
            density_from_coefficients(np.array([0.0]), np.zeros(3))

    def test_order_property(self):
        assert HermiteDistribution(()).order == 0
        assert HermiteDistribution((0.1, 0.2)).order == 2
