"""Projected quasi-Newton solver and exact ellipsoid projection."""

import numpy as np
import pytest
from scipy.optimize import minimize as scipy_minimize

from knpchoice._optimize import (
    SolverSettings,
    minimize,
    project_ellipsoid,
)


class TestProjectEllipsoid:
    def test_interior_point_unchanged(self):
        lam = np.array([2.0, 0.5, 1.0])
        z = np.array([0.1, -0.05, 0.2])
        out = project_ellipsoid(z, lam, 1.0)
        np.testing.assert_array_equal(out, z)
        assert out is not z  # defensive copy

    def test_result_feasible_on_boundary(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(1, 12)
            lam = rng.uniform(1e-6, 10.0, n)
            z = rng.normal(0, 5, n)
            r = rng.uniform(0.1, 3.0)
            x = project_ellipsoid(z, lam, r)
            norm = np.sqrt(np.sum(x * x / lam))
            assert norm <= r * (1 + 1e-12)
            if np.sum(z * z / lam) > r * r:
                assert norm == pytest.approx(r, rel=1e-9)

    def test_matches_quadratic_program(self):
        # Oracle: solve min ||x - z||^2 s.t. sum x^2/lam <= r^2 numerically.
        rng = np.random.default_rng(1)
        for trial in range(10):
            n = 4
            lam = rng.uniform(0.05, 5.0, n)
            z = rng.normal(0, 3, n)
            r = 0.8
            x = project_ellipsoid(z, lam, r)
            ref = scipy_minimize(
                lambda v: np.sum((v - z) ** 2),
                x0=np.zeros(n),
                jac=lambda v: 2 * (v - z),
                constraints=[
                    {
                        "type": "ineq",
                        "fun": lambda v: r**2 - np.sum(v**2 / lam),
                        "jac": lambda v: -2 * v / lam,
                    }
                ],
                method="SLSQP",
                options={"maxiter": 500, "ftol": 1e-14},
            )
            assert np.sum((x - z) ** 2) <= ref.fun + 1e-8, f"trial={trial}"

    def test_idempotent(self):
        lam = np.array([3.0, 0.2])
        z = np.array([4.0, 4.0])
        once = project_ellipsoid(z, lam, 1.0)
        twice = project_ellipsoid(once, lam, 1.0)
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-14)

    def test_extreme_anisotropy(self):
        lam = np.array([1e2, 1e-8])
        z = np.array([50.0, 50.0])
        x = project_ellipsoid(z, lam, 2.0)
        assert np.sqrt(np.sum(x * x / lam)) == pytest.approx(2.0, rel=1e-9)

    def test_ball_special_case_is_rescaling(self):
        z = np.array([3.0, 4.0])
        x = project_ellipsoid(z, np.ones(2), 1.0)
        np.testing.assert_allclose(x, z / 5.0, rtol=1e-12)


class TestMinimize:
    def test_unconstrained_quadratic_exact(self):
        target = np.array([1.0, -2.0, 0.5])

        def fg(x):
            d = x - target
            return float(d @ d), 2 * d

        res = minimize(fg, np.zeros(3), lam=None, radius=None)
        assert res.converged
        np.testing.assert_allclose(res.x, target, atol=1e-6)

    def test_constrained_quadratic_is_projection(self):
        # min ||x - a||^2 over the ellipsoid: solution is the projection of a.
        lam = np.array([2.0, 0.3, 1.0, 0.05])
        a = np.array([2.0, -3.0, 1.5, 0.4])
        r = 0.9
        expected = project_ellipsoid(a, lam, r)

        def fg(x):
            d = x - a
            return float(d @ d), 2 * d

        res = minimize(fg, np.zeros(4), lam=lam, radius=r)
        assert res.converged
        np.testing.assert_allclose(res.x, expected, atol=1e-4)
        assert fg(res.x)[0] <= fg(expected)[0] + 1e-8

    def test_mixed_constrained_free_block(self):
        # First two coordinates constrained, last coordinate free.
        lam = np.ones(2)
        a = np.array([3.0, 0.0, -7.0])

        def fg(x):
            d = x - a
            return float(d @ d), 2 * d

        res = minimize(fg, np.zeros(3), lam=lam, radius=1.0)
        assert res.converged
        np.testing.assert_allclose(res.x, [1.0, 0.0, -7.0], atol=1e-6)

    def test_rosenbrock(self):
        def fg(x):
            a, b = x
            f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
            g = np.array(
                [-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]
            )
            return f, g

        res = minimize(fg, np.array([-1.2, 1.0]), lam=None, radius=None)
        assert res.converged
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)

    def test_matches_scipy_on_active_constraint(self):
        rng = np.random.default_rng(7)
        n = 6
        q = rng.normal(size=(n, n))
        h_mat = q @ q.T + 0.1 * np.eye(n)
        c = rng.normal(size=n)
        lam = rng.uniform(0.1, 4.0, n)
        r = 0.5

        def fg(x):
            return float(0.5 * x @ h_mat @ x + c @ x), h_mat @ x + c

        res = minimize(fg, np.zeros(n), lam=lam, radius=r)
        ref = scipy_minimize(
            fg,
            np.zeros(n),
            jac=True,
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda v: r**2 - np.sum(v**2 / lam),
                    "jac": lambda v: -2 * v / lam,
                }
            ],
            method="SLSQP",
            options={"maxiter": 1000, "ftol": 1e-14},
        )
        assert res.converged
        assert res.value <= ref.fun + 1e-7

    def test_start_outside_feasible_set_is_projected(self):
        lam = np.ones(2)

        def fg(x):
            return float(x @ x), 2 * x

        res = minimize(fg, np.array([10.0, 10.0]), lam=lam, radius=1.0)
        assert res.converged
        np.testing.assert_allclose(res.x, [0.0, 0.0], atol=1e-6)

    def test_maxiter_reports_nonconverged(self):
        def fg(x):
            return float(x @ x), 2 * x

        settings = SolverSettings(max_iters=0)
        res = minimize(fg, np.array([5.0]), lam=None, radius=None, settings=settings)
        assert res.status == "maxiter"
        assert not res.converged

    def test_reports_eval_counts(self):
        def fg(x):
            return float(x @ x), 2 * x

        res = minimize(fg, np.array([2.0, 1.0]), lam=None, radius=None)
        assert res.n_evals >= res.iterations
        assert res.pg_norm < 1e-6
