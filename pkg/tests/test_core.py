"""Dataset handling, least-squares objective, and the joint fit."""

import numpy as np
import pytest
from scipy.special import ndtr

from knpchoice import (
    Dataset,
    FitConfig,
    GaussianKernel,
    HermiteDistribution,
    Standardization,
    build_gram,
    check_pc_bound,
    fit,
    objective,
    objective_grad,
)
from knpchoice.errors import FitError, RankError, ValidationError


def make_data(n=80, seed=0, d=1, tau=()):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    w = rng.uniform(-2, 2, size=(n, d))
    g0 = np.sin(np.pi * w[:, 0]) + 0.5 * w[:, 0] ** 2
    if tau:
        eps = _sample_from(HermiteDistribution(tau), rng, n)
    else:
        eps = rng.standard_normal(n)
    y = (v + g0 - eps > 0).astype(float)
    return Dataset(y=y, v=v, w=w)


def _sample_from(dist, rng, n):
    # Inverse-CDF sampling on a dense grid; plenty for smoke data.
    grid = np.linspace(-10, 10, 4001)
    cdf = dist.cdf(grid)
    u = rng.uniform(1e-9, 1 - 1e-9, n)
    return np.interp(u, cdf, grid)


class TestDataset:
    def test_basic_construction(self):
        d = make_data(20)
        assert d.n == 20
        assert d.d_w == 1
        assert d.w.shape == (20, 1)

    def test_one_dim_w_is_promoted(self):
        d = Dataset(y=np.array([0.0, 1.0] * 5), v=np.zeros(10), w=np.arange(10.0))
        assert d.w.shape == (10, 1)

    def test_subset(self):
        d = make_data(30)
        sub = d.subset(np.array([0, 2, 4, 5, 6, 7, 8, 9, 10, 11]))
        assert sub.n == 10
        np.testing.assert_array_equal(sub.v, d.v[[0, 2, 4, 5, 6, 7, 8, 9, 10, 11]])

    def test_rejects_nonbinary_y(self):
        with pytest.raises(ValidationError):
            Dataset(y=np.array([0.0, 0.5] * 5), v=np.zeros(10), w=np.zeros((10, 1)))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            Dataset(y=np.zeros(10), v=np.zeros(9), w=np.zeros((10, 1)))

    def test_rejects_nonfinite(self):
        v = np.zeros(10)
        v[3] = np.nan
        with pytest.raises(ValidationError):
            Dataset(y=np.array([0.0, 1.0] * 5), v=v, w=np.zeros((10, 1)))

    def test_rejects_too_small(self):
        with pytest.raises(ValidationError):
            Dataset(y=np.array([0.0, 1.0] * 4), v=np.zeros(8), w=np.zeros((8, 1)))


class TestStandardization:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        w = rng.normal(3.0, 2.5, size=(40, 3))
        std = Standardization.from_sample(w)
        np.testing.assert_allclose(std.inverse(std.transform(w)), w, rtol=1e-12)

    def test_transformed_moments(self):
        rng = np.random.default_rng(2)
        w = rng.normal(-1.0, 4.0, size=(200, 2))
        ws = Standardization.from_sample(w).transform(w)
        np.testing.assert_allclose(ws.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(ws.std(axis=0), 1.0, rtol=1e-12)

    def test_constant_column_survives(self):
        w = np.column_stack([np.full(20, 7.0), np.arange(20.0)])
        std = Standardization.from_sample(w)
        ws = std.transform(w)
        assert np.all(ws[:, 0] == 0.0)
        np.testing.assert_allclose(std.inverse(ws), w, rtol=1e-12)


class TestFitConfig:
    def test_defaults_valid(self):
        FitConfig().validate(1)

    def test_rejects_bad_values(self):
        with pytest.raises(ValidationError):
            FitConfig(radius=0.0).validate(1)
        with pytest.raises(ValidationError):
            FitConfig(order=-1).validate(1)
        with pytest.raises(ValidationError):
            FitConfig(order=13).validate(1)
        with pytest.raises(ValidationError):
            FitConfig(n_components=0).validate(1)
        with pytest.raises(ValidationError):
            FitConfig(bandwidth=-1.0).validate(1)
        with pytest.raises(ValidationError):
            FitConfig(n_restarts=0).validate(1)

    def test_w_star_dimension_checked(self):
        FitConfig(w_star=(0.5, 0.5)).validate(2)
        with pytest.raises(ValidationError):
            FitConfig(w_star=(0.5, 0.5)).validate(3)

    def test_dict_round_trip(self):
        cfg = FitConfig(radius=3.0, order=2, n_components=7, seed=11)
        again = FitConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValidationError):
            FitConfig.from_dict({"radius": 1.0, "bogus": 2})


class TestObjective:
    def _setup(self, n=40, m=5, order=2, seed=3):
        rng = np.random.default_rng(seed)
        d = make_data(n, seed=seed)
        ws = Standardization.from_sample(d.w).transform(d.w)
        gram = build_gram(GaussianKernel(1.0), ws.mean(axis=0), ws)
        u_m, lam_m, _ = gram.truncate(m)
        zeta = rng.normal(0, 0.3, m) * np.sqrt(lam_m)
        tau = rng.uniform(-0.3, 0.3, order)
        return d, u_m, zeta, HermiteDistribution(tau)

    def test_value_matches_direct_computation(self):
        d, u_m, zeta, dist = self._setup()
        idx = d.v + (u_m[1:] - u_m[0]) @ zeta
        direct = float(np.mean((d.y - dist.cdf(idx)) ** 2))
        assert objective(d.y, d.v, u_m, zeta, dist) == pytest.approx(direct, rel=1e-14)

    def test_zero_coefficients_standard_normal(self):
        d = make_data(25, seed=4)
        u_m = np.zeros((26, 3))
        val = objective(d.y, d.v, u_m, np.zeros(3), HermiteDistribution())
        direct = float(np.mean((d.y - ndtr(d.v)) ** 2))
        assert val == pytest.approx(direct, rel=1e-14)

    def test_gradient_matches_finite_differences(self):
        d, u_m, zeta, dist = self._setup(n=50, m=6, order=3, seed=5)
        gz, gt = objective_grad(d.y, d.v, u_m, zeta, dist)
        h = 1e-6
        for j in range(zeta.size):
            e = np.zeros_like(zeta)
            e[j] = h
            fd = (
                objective(d.y, d.v, u_m, zeta + e, dist)
                - objective(d.y, d.v, u_m, zeta - e, dist)
            ) / (2 * h)
            assert gz[j] == pytest.approx(fd, rel=5e-6, abs=1e-10)
        for s in range(dist.order):
            bump = dist.tau.copy()
            bump[s] += h
            hi = objective(d.y, d.v, u_m, zeta, HermiteDistribution(bump))
            bump[s] -= 2 * h
            lo = objective(d.y, d.v, u_m, zeta, HermiteDistribution(bump))
            fd = (hi - lo) / (2 * h)
            assert gt[s] == pytest.approx(fd, rel=5e-6, abs=1e-10)


class TestFit:
    def _fit(self, n=120, seed=7, **kw):
        data = make_data(n, seed=seed)
        defaults = dict(radius=10.0, order=2, n_components=12, n_restarts=2, seed=5)
        defaults.update(kw)
        return data, fit(data, FitConfig(**defaults))

    def test_normalization_exact_at_w_star(self):
        data, model = self._fit()
        assert model.predict_g(model.w_star_raw[None, :])[0] == 0.0

    def test_constraint_respected(self):
        data, model = self._fit()
        assert model.rkhs_norm <= model.config.radius * (1 + 1e-10)

    def test_predictions_are_probabilities(self):
        data, model = self._fit()
        rng = np.random.default_rng(8)
        v = rng.normal(0, 3, 200)
        w = rng.uniform(-2.5, 2.5, size=(200, 1))
        p = model.predict_p(v, w)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_deterministic_given_seed(self):
        data = make_data(100, seed=9)
        cfg = FitConfig(order=2, n_components=10, n_restarts=2, seed=3)
        m1 = fit(data, cfg)
        m2 = fit(data, cfg)
        np.testing.assert_array_equal(m1.delta, m2.delta)
        np.testing.assert_array_equal(m1.tau, m2.tau)
        assert m1.objective_value == m2.objective_value

    def test_fit_beats_random_feasible_candidates(self):
        # The fitted objective should not exceed the objective at random
        # feasible coefficient vectors evaluated with the fitted tau.
        data, model = self._fit(n=100, seed=10, n_restarts=3)
        ws = model.standardization.transform(data.w)
        gram = build_gram(model.kernel, model.centers[0], ws)
        u_m, lam_m, _ = gram.truncate(model.n_components)
        rng = np.random.default_rng(11)
        for _ in range(200):
            direction = rng.standard_normal(model.n_components)
            direction /= np.linalg.norm(direction)
            zeta = direction * np.sqrt(lam_m) * model.config.radius * rng.random()
            val = objective(data.y, data.v, u_m, zeta, model.dist)
            assert model.objective_value <= val + 1e-12

    def test_improves_on_probit_when_g_is_nonlinear(self):
        data, model = self._fit(n=150, seed=12, order=2, n_components=15)
        idx_probit = data.v
        probit_obj = float(np.mean((data.y - ndtr(idx_probit)) ** 2))
        assert model.objective_value < probit_obj

    def test_auto_rank_reduction(self):
        data = make_data(40, seed=13)
        cfg = FitConfig(order=1, n_components=41, n_restarts=1, seed=1)
        model = fit(data, cfg)
        assert model.n_components <= 41
        assert model.diagnostics.effective_rank == model.n_components
        assert model.diagnostics.requested_components == 41

    def test_strict_rank_raises(self):
        data = make_data(40, seed=13)
        cfg = FitConfig(order=1, n_components=41, n_restarts=1, strict_rank=True)
        with pytest.raises(RankError):
            fit(data, cfg)

    def test_constant_y_rejected(self):
        data = make_data(30, seed=14)
        bad = Dataset(y=np.ones(30), v=data.v, w=data.w)
        with pytest.raises(ValidationError):
            fit(bad, FitConfig())

    def test_non_dataset_rejected(self):
        with pytest.raises(ValidationError):
            fit((np.zeros(10), np.zeros(10), np.zeros((10, 1))), FitConfig())

    def test_custom_w_star(self):
        data = make_data(60, seed=15)
        cfg = FitConfig(order=1, n_components=8, n_restarts=1, w_star=(0.7,))
        model = fit(data, cfg)
        np.testing.assert_array_equal(model.w_star_raw, [0.7])
        assert model.predict_g(np.array([[0.7]]))[0] == 0.0

    def test_warm_start_runs_and_matches_order(self):
        data = make_data(80, seed=16)
        cfg = FitConfig(order=2, n_components=8, n_restarts=2, seed=2)
        base = fit(data, cfg)
        again = fit(data, cfg, warm_start=base)
        # Stopping rules certify values only to ~1e-6 relative, so a warm
        # start may land a hair above the cold fit; never materially worse.
        assert again.objective_value <= base.objective_value + 1e-6
        bad_cfg = FitConfig(order=3, n_components=8, n_restarts=1)
        with pytest.raises(ValidationError):
            fit(data, bad_cfg, warm_start=base)

    def test_diagnostics_recorded(self):
        data, model = self._fit(n=90, seed=17, n_restarts=3)
        diag = model.diagnostics
        assert len(diag.restarts) == 3
        assert diag.restarts[diag.best_restart].converged
        best_val = diag.restarts[diag.best_restart].value
        assert model.objective_value == pytest.approx(best_val, rel=1e-12)

    def test_all_restarts_failing_raises_fit_error(self):
        data = make_data(60, seed=18)
        cfg = FitConfig(order=2, n_components=10, n_restarts=2, max_iters=1)
        with pytest.raises(FitError):
            fit(data, cfg)

    def test_precomputed_gram_equivalent(self):
        data = make_data(70, seed=19)
        cfg = FitConfig(order=1, n_components=9, n_restarts=2, seed=4)
        std = Standardization.from_sample(data.w)
        ws = std.transform(data.w)
        gram = build_gram(
            GaussianKernel(cfg.bandwidth), std.transform(data.w.mean(axis=0)), ws
        )
        m1 = fit(data, cfg)
        m2 = fit(data, cfg, gram=gram)
        np.testing.assert_array_equal(m1.delta, m2.delta)
        assert m1.objective_value == m2.objective_value


class TestPcBound:
    def test_truncated_fit_certified(self):
        data = make_data(60, seed=20)
        full_cfg = FitConfig(order=1, n_components=61, n_restarts=2, seed=6)
        full = fit(data, full_cfg)
        small_cfg = FitConfig(order=1, n_components=5, n_restarts=2, seed=6)
        small = fit(data, small_cfg)
        report = check_pc_bound(
            small, full.objective_value, reference_model=full
        )
        assert report.satisfied
        assert report.lambda_next > 0
        assert report.bound >= full.objective_value

    def test_full_rank_bound_is_tight(self):
        data = make_data(50, seed=21)
        cfg = FitConfig(order=1, n_components=51, n_restarts=2, seed=7)
        model = fit(data, cfg)
        # Components span the usable rank: any discarded eigenvalue is below
        # the rank threshold, so the certificate is essentially equality.
        report = check_pc_bound(model, model.objective_value)
        assert report.lambda_next <= 1e-11
        assert report.satisfied
        assert report.gap == pytest.approx(
            4.0 * report.density_sup * report.radius * np.sqrt(report.lambda_next),
            rel=1e-9,
        )
