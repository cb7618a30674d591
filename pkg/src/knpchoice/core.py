"""Joint least-squares estimation of binary choice probabilities.

The model is P(Y=1 | V, W) = F(V + g(W)): the index coefficient on V is fixed
at one and g(w*) = 0 at a reference point w*, so (g, F) is identified.  The
systematic part g lives in a Gaussian-kernel RKHS ball of radius B; the error
distribution F has a squared-polynomial-times-normal density.  Estimation
minimizes the mean squared residual between Y and F(V + g(W)).

By the representer property the RKHS part reduces to coefficients on the
kernel sections at (w*, W_1, ..., W_n); the fit is run in the gram matrix's
principal-component coordinates truncated at m components, with the norm
constraint becoming an axis-aligned ellipsoid.  Discarding components costs
at most 4 * sup f * B * lambda_{m+1}^{1/2} in objective value, which
check_pc_bound verifies on fitted instances.
"""

from dataclasses import dataclass

import numpy as np

from . import util
from ._optimize import SolverSettings, minimize, project_ellipsoid
from .errors import FitError, RankError, ValidationError
from .hermite import MAX_ORDER, HermiteDistribution
from .kernel import GaussianKernel, build_gram

MIN_OBS = 10


@dataclass
class Dataset:
    """Observations (y, v, w): binary outcome, scalar special regressor with
    unit index coefficient, and the remaining covariates row-stacked in w."""

    y: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        self.v = np.asarray(self.v, dtype=np.float64).ravel()
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2:
            raise ValidationError(f"w must be 1-D or 2-D, got shape {w.shape}")
        self.w = w
        n = self.y.shape[0]
        if self.v.shape[0] != n or self.w.shape[0] != n:
            raise ValidationError(
                f"length mismatch: y has {n}, v has {self.v.shape[0]}, "
                f"w has {self.w.shape[0]} rows"
            )
        if n < MIN_OBS:
            raise ValidationError(f"need at least {MIN_OBS} observations, got {n}")
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.w))):
            raise ValidationError("v and w must be finite")
        if not np.all((self.y == 0.0) | (self.y == 1.0)):
            raise ValidationError("y must be binary 0/1")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d_w(self):
        return self.w.shape[1]

    def subset(self, idx):
        return Dataset(self.y[idx], self.v[idx], self.w[idx])


@dataclass(frozen=True)
class Standardization:
    """Per-column affine map applied to w before kernel evaluation.

    v is never rescaled: its unit coefficient is the scale normalization of
    the model, so changing its units would change the estimand.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_sample(cls, w):
        mean = w.mean(axis=0)
        sd = w.std(axis=0)
        scale = np.where(sd > 0.0, sd, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, w):
        return (np.asarray(w, dtype=np.float64) - self.mean) / self.scale

    def inverse(self, w_std):
        return np.asarray(w_std, dtype=np.float64) * self.scale + self.mean


@dataclass
class FitConfig:
    """Tuning and optimizer settings for a single fit.

    radius is the RKHS norm bound B, order the polynomial degree J of the
    error density, n_components the spectral truncation m, bandwidth the
    Gaussian kernel width on standardized covariates.  w_star is the raw-scale
    reference point where g is pinned to zero; None means the training mean.
    When n_components exceeds the gram effective rank the fit reduces it
    automatically unless strict_rank is set.
    """

    radius: float = 10.0
    order: int = 4
    n_components: int = 25
    bandwidth: float = 1.0
    w_star: object = None
    strict_rank: bool = False
    seed: int = 0
    n_restarts: int = 5
    max_iters: int = 2000
    grad_tol: float = 1e-7

    def validate(self, d_w=None):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValidationError(f"radius must be positive, got {self.radius}")
        if not 0 <= int(self.order) <= MAX_ORDER:
            raise ValidationError(f"order must be in [0, {MAX_ORDER}], got {self.order}")
        if int(self.n_components) < 1:
            raise ValidationError(f"n_components must be >= 1, got {self.n_components}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValidationError(f"bandwidth must be positive, got {self.bandwidth}")
        if int(self.n_restarts) < 1:
            raise ValidationError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if int(self.max_iters) < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not np.isfinite(self.grad_tol) or self.grad_tol <= 0:
            raise ValidationError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.w_star is not None:
            ws = np.atleast_1d(np.asarray(self.w_star, dtype=np.float64))
            if ws.ndim != 1 or not np.all(np.isfinite(ws)):
                raise ValidationError("w_star must be a finite point")
            if d_w is not None and ws.shape[0] != d_w:
                raise ValidationError(
                    f"w_star has dimension {ws.shape[0]} but data has d_w={d_w}"
                )

    def to_dict(self):
        out = {
            "radius": float(self.radius),
            "order": int(self.order),
            "n_components": int(self.n_components),
            "bandwidth": float(self.bandwidth),
            "w_star": None
            if self.w_star is None
            else [float(x) for x in np.atleast_1d(self.w_star)],
            "strict_rank": bool(self.strict_rank),
            "seed": int(self.seed),
            "n_restarts": int(self.n_restarts),
            "max_iters": int(self.max_iters),
            "grad_tol": float(self.grad_tol),
        }
        return out

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)


@dataclass
class RestartInfo:
    index: int
    value: float
    pg_norm: float
    iterations: int
    n_evals: int
    status: str
    converged: bool


@dataclass
class FitDiagnostics:
    requested_components: int
    effective_rank: int
    n_components: int
    restarts: list
    best_restart: int


class _Problem:
    """Least-squares objective/gradient for an index that is linear in its
    coefficient block: idx_i = v_i + [x_mat beta]_i, plus the error family's
    tau block.  Parameter vector x stacks (beta, tau)."""

    def __init__(self, y, v, x_mat, order):
        self.y = y
        self.v = v
        self.x_mat = x_mat
        self.p = x_mat.shape[1]
        self.order = order
        self.n = y.shape[0]

    def split(self, x):
        return x[: self.p], x[self.p :]

    def value_grad(self, x):
        beta, tau = self.split(x)
        dist = HermiteDistribution(tau)
        idx = self.v + self.x_mat @ beta
        cdf, dens, grad_tau = dist.evaluate(idx, need_grad=self.order > 0)
        resid = self.y - cdf
        value = float(resid @ resid) / self.n
        coef = -2.0 / self.n
        g_beta = coef * (self.x_mat.T @ (resid * dens))
        if self.order:
            g_tau = coef * (grad_tau.T @ resid)
            return value, np.concatenate([g_beta, g_tau])
        return value, g_beta


def _pc_design(u_m, scales=None):
    """Index design matrix of the principal-component parameterization:
    row i is U_m[i+1] - U_m[0] (the w* row differenced out), optionally
    column-scaled by sqrt(lam) so the norm constraint becomes the isotropic
    ball, on which the projected quasi-Newton solver behaves far better than
    on the raw ellipsoid."""
    du = u_m[1:] - u_m[0]
    return du if scales is None else du * scales


def objective(y, v, u_m, zeta, dist):
    """Mean squared residual (1/n) sum (y_i - F(v_i + g(w_i)))^2 for the
    principal-component parameterization g = [U_m zeta] - [U_m zeta]_0."""
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    idx = v + _pc_design(u_m) @ zeta
    resid = y - dist.cdf(idx)
    return float(resid @ resid) / y.shape[0]


def objective_grad(y, v, u_m, zeta, dist):
    """Gradient of objective() in (zeta, tau); returns the pair of arrays."""
    problem = _Problem(
        np.asarray(y, dtype=np.float64),
        np.asarray(v, dtype=np.float64),
        _pc_design(u_m),
        dist.order,
    )
    _, g = problem.value_grad(np.concatenate([zeta, dist.tau]))
    return g[: u_m.shape[1]], g[u_m.shape[1] :]


@dataclass
class KnpModel:
    """Fitted model: kernel expansion coefficients plus error distribution.

    centers holds the standardized points (w*, W_1, ..., W_n); delta the
    kernel coefficients on those centers.  predict_g subtracts the expansion
    at w* through a common code path, so predict_g(w_star_raw) is exactly 0.
    """

    config: FitConfig
    standardization: Standardization
    kernel: GaussianKernel
    centers: np.ndarray
    delta: np.ndarray
    zeta: np.ndarray
    tau: np.ndarray
    dist: HermiteDistribution
    objective_value: float
    n_components: int
    lambda_next: float
    rkhs_norm: float
    diagnostics: FitDiagnostics = None

    @property
    def d_w(self):
        return self.centers.shape[1]

    @property
    def w_star(self):
        """Reference point in standardized coordinates."""
        return self.centers[0]

    @property
    def w_star_raw(self):
        return self.standardization.inverse(self.centers[0])

    def _points(self, w):
        arr = np.asarray(w, dtype=np.float64)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.shape[1] != self.d_w:
            raise ValidationError(f"points have dimension {pts.shape[1]}, model has {self.d_w}")
        return pts, single

    def predict_g(self, w):
        """Systematic function at raw-scale points w ((d,) or (k, d))."""
        pts, single = self._points(w)
        ws = self.standardization.transform(pts)
        kv = self.kernel.cross(self.centers, ws)
        k0 = self.kernel.cross(self.centers, self.centers[0][None, :])
        g = self.delta @ (kv - k0)
        return float(g[0]) if single else g

    def predict_p(self, v, w):
        """Choice probability F(v + g(w)) at raw-scale points."""
        g = self.predict_g(w)
        if np.isscalar(g) or np.ndim(g) == 0:
            return float(self.dist.cdf(float(v) + g))
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (len(g),):
            raise ValidationError(f"v has shape {v.shape}, expected ({len(g)},)")
        return self.dist.cdf(v + g)


def _uniform_in_ellipsoid(rng, lam, radius):
    """Uniform draw from {x : sum x_j^2 / lam_j <= radius^2}."""
    m = lam.shape[0]
    z = rng.standard_normal(m)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        return np.zeros(m)
    u = z / norm * rng.random() ** (1.0 / m)
    return radius * np.sqrt(lam) * u


def _warm_vector(warm, config, data, w_star_raw, u_m, lam_m):
    """Restart-0 start from a previous model: its systematic function values
    are matched in the new sample's component basis, projected onto the norm
    ball, and paired with the previous tau."""
    if warm.tau.shape[0] != config.order:
        raise ValidationError(
            f"warm start has order {warm.tau.shape[0]}, config has {config.order}"
        )
    g_aug = warm.predict_g(np.vstack([w_star_raw[None, :], data.w]))
    zeta0 = project_ellipsoid(u_m.T @ g_aug, lam_m, config.radius)
    return np.concatenate([zeta0 / np.sqrt(lam_m), warm.tau])


def fit(data, config, gram=None, warm_start=None):
    """Fit the model by multistart projected quasi-Newton.

    gram may carry a precomputed GramSystem over (w*, W_1, ..., W_n) in
    standardized coordinates (it is validated against the config bandwidth).
    warm_start seeds restart 0 from a previously fitted model, as used by
    resampling loops.  Raises FitError when no restart reaches a stationary
    point.
    """
    if not isinstance(data, Dataset):
        raise ValidationError(f"data must be a Dataset, got {type(data).__name__}")
    config.validate(data.d_w)
    if np.all(data.y == data.y[0]):
        raise ValidationError("y is constant; both outcomes must occur")

    std = Standardization.from_sample(data.w)
    ws = std.transform(data.w)
    if config.w_star is None:
        w_star_raw = data.w.mean(axis=0)
    else:
        w_star_raw = np.atleast_1d(np.asarray(config.w_star, dtype=np.float64))
    kern = GaussianKernel(config.bandwidth)
    if gram is None:
        gram = build_gram(kern, std.transform(w_star_raw), ws)
    else:
        if gram.n_centers != data.n + 1:
            raise ValidationError(
                f"gram has {gram.n_centers} centers, expected {data.n + 1}"
            )
        if gram.kernel.bandwidth != config.bandwidth:
            raise ValidationError("gram bandwidth differs from config bandwidth")

    rank = gram.effective_rank()
    m_req = int(config.n_components)
    if m_req > rank and config.strict_rank:
        raise RankError(f"n_components={m_req} exceeds gram effective rank {rank}")
    m_eff = min(m_req, rank)
    u_m, lam_m, lam_next = gram.truncate(m_eff)
    scales = np.sqrt(lam_m)
    ball = np.ones(m_eff)

    problem = _Problem(data.y, data.v, _pc_design(u_m, scales), int(config.order))
    settings = SolverSettings(max_iters=int(config.max_iters), grad_tol=config.grad_tol)
    infos = []
    results = []
    for r in range(int(config.n_restarts)):
        if r == 0:
            if warm_start is not None:
                x0 = _warm_vector(warm_start, config, data, w_star_raw, u_m, lam_m)
            else:
                x0 = np.zeros(m_eff + config.order)
        else:
            rng = util.rng_stream(config.seed, util.STREAM_RESTART, r)
            eta0 = _uniform_in_ellipsoid(rng, ball, config.radius)
            tau0 = rng.uniform(-0.5, 0.5, config.order)
            x0 = np.concatenate([eta0, tau0])
        res = minimize(problem.value_grad, x0, ball, config.radius, settings)
        results.append(res)
        infos.append(
            RestartInfo(
                index=r,
                value=res.value,
                pg_norm=res.pg_norm,
                iterations=res.iterations,
                n_evals=res.n_evals,
                status=res.status,
                converged=res.converged,
            )
        )

    usable = [r for r in range(len(results)) if results[r].converged]
    if not usable:
        raise FitError(
            "no restart converged: "
            + ", ".join(f"restart {i.index} {i.status} pg={i.pg_norm:.2e}" for i in infos)
        )
    best = min(usable, key=lambda r: results[r].value)
    eta, tau = problem.split(results[best].x)
    zeta = scales * eta
    delta = u_m @ (zeta / lam_m)
    dist = HermiteDistribution(tau)
    diagnostics = FitDiagnostics(
        requested_components=m_req,
        effective_rank=rank,
        n_components=m_eff,
        restarts=infos,
        best_restart=best,
    )
    return KnpModel(
        config=config,
        standardization=std,
        kernel=kern,
        centers=gram.centers,
        delta=delta,
        zeta=zeta,
        tau=tau,
        dist=dist,
        objective_value=results[best].value,
        n_components=m_eff,
        lambda_next=lam_next,
        rkhs_norm=float(np.sqrt(np.sum(zeta * zeta / lam_m))),
        diagnostics=diagnostics,
    )


@dataclass
class PcBoundReport:
    """Truncation-cost certificate for a fitted model.

    bound = reference_objective + 4 * density_sup * radius * sqrt(lambda_next)
    must dominate the truncated fit's objective value.
    """

    objective: float
    reference_objective: float
    density_sup: float
    radius: float
    lambda_next: float
    bound: float

    @property
    def gap(self):
        return self.bound - self.objective

    @property
    def satisfied(self):
        return self.objective <= self.bound + 1e-12


def check_pc_bound(model, reference_objective, reference_model=None, grid=None):
    """Certificate that spectral truncation cost the objective at most
    4 * sup f * B * lambda_{m+1}^{1/2} relative to a reference fit.

    The density sup is taken over the fitted error density and, when given,
    the reference model's (the bound's constant involves the reference
    density; including both is conservative in the safe direction).
    """
    if grid is None:
        grid = np.linspace(-12.0, 12.0, 4801)
    sup = float(np.max(model.dist.density(grid)))
    if reference_model is not None:
        sup = max(sup, float(np.max(reference_model.dist.density(grid))))
    bound = reference_objective + 4.0 * sup * model.config.radius * np.sqrt(
        max(model.lambda_next, 0.0)
    )
    return PcBoundReport(
        objective=model.objective_value,
        reference_objective=reference_objective,
        density_sup=sup,
        radius=model.config.radius,
        lambda_next=model.lambda_next,
        bound=float(bound),
    )
