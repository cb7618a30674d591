"""K-fold cross-validation over the tuning triple (radius, order, n_components).

Folds come from a seeded permutation that is fixed across candidate triples,
and every fit inside a fold uses the same derived seed, so scores do not
depend on grid order or on which triples are present.  The selection score is
the held-out mean squared probability residual.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import util
from .core import Standardization, fit
from .errors import FitError, NumericalError, ValidationError
from .kernel import GaussianKernel, build_gram


@dataclass(frozen=True)
class CvPlan:
    """Grid of (radius, order, n_components) triples and fold layout."""

    grid: tuple
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if int(self.folds) < 2:
            raise ValidationError(f"folds must be >= 2, got {self.folds}")
        if not self.grid:
            raise ValidationError("grid must contain at least one triple")
        for t in self.grid:
            if len(t) != 3:
                raise ValidationError(f"grid entries must be triples, got {t!r}")


@dataclass
class CvRow:
    radius: float
    order: int
    n_components: int
    score: float
    n_failed: int


@dataclass
class CvResult:
    best: tuple
    rows: list
    folds: int
    seed: int

    def best_config(self, base):
        radius, order, n_components = self.best
        return replace(
            base, radius=radius, order=int(order), n_components=int(n_components)
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["radius", "order", "n_components", "score", "n_failed"])
            for r in self.rows:
                writer.writerow(
                    [repr(r.radius), r.order, r.n_components, repr(r.score), r.n_failed]
                )


def fold_indices(n, folds, seed):
    """Deterministic balanced fold assignment: list of index arrays."""
    perm = util.rng_stream(seed, util.STREAM_CV_FOLDS).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(data, plan, base_config):
    """Score every triple in plan.grid by k-fold held-out squared error.

    Failed fits score as +inf for their fold and are counted; a triple whose
    every fold failed is never selected.  Ties prefer smaller n_components,
    then smaller order, then smaller radius.  Raises NumericalError when all
    triples fail everywhere.
    """
    if int(plan.folds) > data.n // 2:
        raise ValidationError(f"folds={plan.folds} too large for n={data.n}")
    parts = fold_indices(data.n, int(plan.folds), plan.seed)
    all_idx = np.arange(data.n)
    kern = GaussianKernel(base_config.bandwidth)

    scores = np.zeros((len(plan.grid), len(parts)))
    failed = np.zeros((len(plan.grid), len(parts)), dtype=int)
    for k, test_idx in enumerate(parts):
        train_idx = np.setdiff1d(all_idx, test_idx)
        train = data.subset(train_idx)
        test = data.subset(test_idx)
        # One gram serves every triple in this fold: truncation happens
        # inside fit.  Construction mirrors fit() exactly so the cached gram
        # is indistinguishable from the one fit would build.
        base = replace(base_config, seed=int(
            util.rng_stream(plan.seed, util.STREAM_CV_FIT, k).integers(2**31)
        ))
        std = Standardization.from_sample(train.w)
        ws = std.transform(train.w)
        if base.w_star is None:
            w_star_std = std.transform(train.w.mean(axis=0))
        else:
            w_star_std = std.transform(np.asarray(base.w_star, dtype=np.float64))
        gram = build_gram(kern, w_star_std, ws)
        for t, (radius, order, m) in enumerate(plan.grid):
            cfg = replace(
                base, radius=float(radius), order=int(order), n_components=int(m)
            )
            try:
                model = fit(train, cfg, gram=gram)
            except FitError:
                scores[t, k] = np.inf
                failed[t, k] = 1
                continue
            resid = test.y - model.predict_p(test.v, test.w)
            scores[t, k] = float(resid @ resid) / test.n

    rows = []
    for t, (radius, order, m) in enumerate(plan.grid):
        ok = failed[t] == 0
        score = float(np.mean(scores[t])) if ok.all() else float("inf")
        rows.append(
            CvRow(
                radius=float(radius),
                order=int(order),
                n_components=int(m),
                score=score,
                n_failed=int(failed[t].sum()),
            )
        )
    usable = [r for r in rows if np.isfinite(r.score)]
    if not usable:
        raise NumericalError("cross-validation failed for every triple in the grid")
    best_row = min(usable, key=lambda r: (r.score, r.n_components, r.order, r.radius))
    return CvResult(
        best=(best_row.radius, best_row.order, best_row.n_components),
        rows=rows,
        folds=int(plan.folds),
        seed=int(plan.seed),
    )
