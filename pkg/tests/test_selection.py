"""K-fold cross-validation over the tuning grid."""

import numpy as np
import pytest

from knpchoice import CvPlan, FitConfig, cross_validate
from knpchoice.errors import NumericalError, ValidationError
from knpchoice.selection import fold_indices

from test_core import make_data


class TestFoldIndices:
    def test_partition_properties(self):
        folds = fold_indices(53, 5, seed=0)
        assert len(folds) == 5
        all_idx = np.concatenate(folds)
        assert all_idx.size == 53
        np.testing.assert_array_equal(np.sort(all_idx), np.arange(53))
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic(self):
        a = fold_indices(40, 4, seed=7)
        b = fold_indices(40, 4, seed=7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_seed_changes_assignment(self):
        a = np.concatenate(fold_indices(40, 4, seed=1))
        b = np.concatenate(fold_indices(40, 4, seed=2))
        assert not np.array_equal(a, b)

    def test_indices_sorted_within_fold(self):
        for f in fold_indices(37, 3, seed=3):
            assert np.all(np.diff(f) > 0)


class TestCrossValidate:
    def _base(self):
        return FitConfig(order=1, n_components=6, n_restarts=1, seed=0)

    def test_scores_and_best(self):
        data = make_data(80, seed=40)
        plan = CvPlan(grid=((5.0, 1, 4), (5.0, 1, 8), (20.0, 2, 8)), folds=2, seed=1)
        result = cross_validate(data, plan, self._base())
        assert len(result.rows) == 3
        assert all(np.isfinite(r.score) for r in result.rows)
        best_score = min(r.score for r in result.rows)
        picked = [
            r
            for r in result.rows
            if (r.radius, r.order, r.n_components) == result.best
        ]
        assert picked[0].score == best_score

    def test_deterministic_and_grid_order_invariant(self):
        data = make_data(70, seed=41)
        grid = ((5.0, 1, 4), (10.0, 2, 6), (2.0, 0, 8))
        r1 = cross_validate(data, CvPlan(grid=grid, folds=2, seed=3), self._base())
        r2 = cross_validate(
            data, CvPlan(grid=grid[::-1], folds=2, seed=3), self._base()
        )
        assert r1.best == r2.best
        s1 = {(r.radius, r.order, r.n_components): r.score for r in r1.rows}
        s2 = {(r.radius, r.order, r.n_components): r.score for r in r2.rows}
        assert s1 == s2

    def test_ties_prefer_fewer_components(self):
        # Components beyond the gram rank are dropped inside the fit, so both
        # entries produce identical fits and scores; the smaller wins.
        data = make_data(24, seed=42)
        plan = CvPlan(grid=((5.0, 0, 20), (5.0, 0, 23)), folds=2, seed=2)
        result = cross_validate(data, plan, self._base())
        rows = {r.n_components: r.score for r in result.rows}
        assert rows[20] == rows[23]
        assert result.best[2] == 20

    def test_best_config_substitutes_triple(self):
        data = make_data(60, seed=43)
        plan = CvPlan(grid=((7.5, 2, 5),), folds=2, seed=4)
        result = cross_validate(data, plan, self._base())
        cfg = result.best_config(FitConfig(bandwidth=0.9, seed=77))
        assert cfg.radius == 7.5
        assert cfg.order == 2
        assert cfg.n_components == 5
        assert cfg.bandwidth == 0.9
        assert cfg.seed == 77

    def test_all_failures_raise(self):
        data = make_data(40, seed=44)
        base = FitConfig(order=1, n_components=4, n_restarts=1, max_iters=1)
        plan = CvPlan(grid=((5.0, 1, 4),), folds=2, seed=5)
        with pytest.raises(NumericalError):
            cross_validate(data, plan, base)

    def test_too_many_folds_rejected(self):
        data = make_data(20, seed=45)
        plan = CvPlan(grid=((5.0, 1, 4),), folds=11, seed=0)
        with pytest.raises(ValidationError):
            cross_validate(data, plan, self._base())

    def test_csv_output(self, tmp_path):
        data = make_data(50, seed=46)
        plan = CvPlan(grid=((5.0, 1, 4), (5.0, 1, 6)), folds=2, seed=6)
        result = cross_validate(data, plan, self._base())
        path = tmp_path / "scores.csv"
        result.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "radius,order,n_components,score,n_failed"
        assert len(lines) == 3


class TestCvPlanValidation:
    def test_rejects_bad_plans(self):
        with pytest.raises(ValidationError):
            CvPlan(grid=(), folds=2)
        with pytest.raises(ValidationError):
            CvPlan(grid=((1.0, 1, 1),), folds=1)
        with pytest.raises(ValidationError):
            CvPlan(grid=((1.0, 1),), folds=2)
