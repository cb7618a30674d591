"""Pairs bootstrap for functionals of the fitted model.

Each replication resamples observations with replacement, refits with the
same tuning (warm-started from the original solution, fewer restarts), and
re-evaluates the requested targets.  Intervals are percentile intervals of
the replicate distribution.  Replication r draws from substream
(seed, STREAM_BOOT_INDEX, r) and fits with substream-derived seeds, so
results are independent of worker count.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from . import util
from .core import fit
from .effects import ape, conditional_ape
from .errors import FitError, NumericalError, ValidationError


@dataclass(frozen=True)
class BootstrapSpec:
    replications: int = 200
    levels: tuple = (0.95,)
    seed: int = 0
    n_restarts: int = 2
    max_failure_fraction: float = 0.05
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.replications) < 10:
            raise ValidationError("need at least 10 bootstrap replications")
        for lv in self.levels:
            if not 0.0 < lv < 1.0:
                raise ValidationError(f"confidence level must be in (0,1), got {lv}")


@dataclass(frozen=True)
class ApeTarget:
    """Average partial effect of one coordinate, optionally within a region."""

    coord: object
    region: object = None
    label: str = ""

    @property
    def name(self):
        if self.label:
            return self.label
        base = f"ape_{self.coord}"
        return base if self.region is None else base + "_region"

    def evaluate(self, model, data):
        if self.region is None:
            return ape(model, data, self.coord)
        return conditional_ape(model, data, self.coord, self.region)


@dataclass(frozen=True)
class GValueTarget:
    """g at a raw-scale point; point=None means the model's own reference
    point, which is zero by construction in every refit."""

    point: object = None
    label: str = ""

    @property
    def name(self):
        return self.label or "g_point"

    def evaluate(self, model, data):
        w = model.w_star_raw if self.point is None else np.asarray(self.point)
        return float(model.predict_g(w))


@dataclass(frozen=True)
class PValueTarget:
    """Choice probability at a raw-scale point (v, w)."""

    v: float
    w: object
    label: str = ""

    @property
    def name(self):
        return self.label or "p_point"

    def evaluate(self, model, data):
        return float(model.predict_p(self.v, np.asarray(self.w)))


@dataclass
class BootstrapResult:
    targets: list
    estimates: np.ndarray      # (T,) point estimates on the original fit
    replicates: np.ndarray     # (R, T), NaN rows for failed refits
    intervals: dict            # (target name, level) -> (lo, hi)
    n_failed: int
    levels: tuple

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["target", "level", "estimate", "lower", "upper", "replications", "failed"]
            )
            n_ok = self.replicates.shape[0] - self.n_failed
            for t, target in enumerate(self.targets):
                for lv in self.levels:
                    lo, hi = self.intervals[(target.name, lv)]
                    writer.writerow(
                        [
                            target.name,
                            repr(float(lv)),
                            repr(float(self.estimates[t])),
                            repr(float(lo)),
                            repr(float(hi)),
                            n_ok,
                            self.n_failed,
                        ]
                    )


def _one_replication(data, config, spec, targets, model, r):
    idx = util.rng_stream(spec.seed, util.STREAM_BOOT_INDEX, r).integers(0, data.n, data.n)
    bdata = data.subset(idx)
    bcfg = replace(
        config,
        n_restarts=int(spec.n_restarts),
        seed=int(util.rng_stream(spec.seed, util.STREAM_BOOT_FIT, r).integers(2**31)),
    )
    try:
        bmodel = fit(bdata, bcfg, warm_start=model)
    except (FitError, ValidationError):
        # Resamples can be degenerate (e.g. one outcome class); count and move on.
        return np.full(len(targets), np.nan)
    return np.array([t.evaluate(bmodel, bdata) for t in targets])


def bootstrap(data, config, spec, targets, model=None):
    """Percentile bootstrap intervals for the given targets.

    model may carry the fit of `data` under `config` (it is refitted here
    when absent).  Raises NumericalError when more than
    spec.max_failure_fraction of the replications fail to refit.
    """
    if not targets:
        raise ValidationError("need at least one bootstrap target")
    if model is None:
        model = fit(data, config)
    estimates = np.array([t.evaluate(model, data) for t in targets])

    reps = int(spec.replications)
    rows = Parallel(n_jobs=int(spec.n_jobs))(
        delayed(_one_replication)(data, config, spec, targets, model, r)
        for r in range(reps)
    )
    replicates = np.vstack(rows)
    bad = np.isnan(replicates[:, 0])
    n_failed = int(bad.sum())
    if n_failed > spec.max_failure_fraction * reps:
        raise NumericalError(
            f"{n_failed}/{reps} bootstrap refits failed "
            f"(limit {spec.max_failure_fraction:.0%})"
        )

    good = replicates[~bad]
    intervals = {}
    for t, target in enumerate(targets):
        for lv in spec.levels:
            alpha = (1.0 - lv) / 2.0
            lo, hi = np.quantile(good[:, t], [alpha, 1.0 - alpha])
            intervals[(target.name, lv)] = (float(lo), float(hi))
    return BootstrapResult(
        targets=list(targets),
        estimates=estimates,
        replicates=replicates,
        intervals=intervals,
        n_failed=n_failed,
        levels=tuple(spec.levels),
    )
