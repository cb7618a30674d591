"""Marginal effects of the estimated choice probability.

The fitted probability is p(v, w) = F(v + g(w)), so its gradient in (v, w) is
f(v + g(w)) * (1, grad g(w)), with grad g available in closed form from the
kernel expansion.  Average partial effects are sample means of that gradient,
optionally restricted to a region or reweighted by an arbitrary density.
"""

import warnings

import numpy as np

from .errors import ValidationError


def coord_index(coord, d_w):
    """Resolve a coordinate spec to an index into (v, w_1, ..., w_d).

    Accepts 0 or "v" for the special regressor and j or "wj" (1-based) for
    the j-th remaining covariate.
    """
    if isinstance(coord, str):
        name = coord.strip().lower()
        if name == "v":
            return 0
        if name.startswith("w") and name[1:].isdigit():
            j = int(name[1:])
            if 1 <= j <= d_w:
                return j
        raise ValidationError(f"unknown coordinate {coord!r}; use v or w1..w{d_w}")
    j = int(coord)
    if not 0 <= j <= d_w:
        raise ValidationError(f"coordinate index {j} out of range 0..{d_w}")
    return j


def index_gradient(model, w):
    """Gradient of g at raw-scale points w; shape (k, d_w).

    grad g(w) = sum_i delta_i grad_w k(c_i, w), computed in standardized
    coordinates and mapped back through the chain rule.
    """
    pts = np.atleast_2d(np.asarray(w, dtype=np.float64))
    ws = model.standardization.transform(pts)
    kv = model.kernel.cross(model.centers, ws)
    weighted = model.delta[:, None] * kv
    total = weighted.sum(axis=0)
    moment = model.centers.T @ weighted
    grad_std = (moment.T - ws * total[:, None]) / model.kernel.bandwidth**2
    return grad_std / model.standardization.scale[None, :]


def ccp_gradient(model, v, w):
    """Gradient of p(v, w) = F(v + g(w)) in (v, w); shape (k, 1 + d_w)."""
    pts = np.atleast_2d(np.asarray(w, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if v.shape[0] != pts.shape[0]:
        raise ValidationError(f"v has {v.shape[0]} rows, w has {pts.shape[0]}")
    dens = model.dist.density(v + model.predict_g(pts))
    out = np.empty((pts.shape[0], 1 + pts.shape[1]))
    out[:, 0] = dens
    out[:, 1:] = dens[:, None] * index_gradient(model, pts)
    return out


def _region_mask(region, v, w):
    if region is None:
        return np.ones(v.shape[0], dtype=bool)
    if callable(region):
        mask = np.asarray(region(v, w), dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    if mask.shape != v.shape:
        raise ValidationError(f"region mask has shape {mask.shape}, expected {v.shape}")
    return mask


def ape(model, data, coord):
    """Average partial effect: sample mean of the CCP gradient coordinate."""
    j = coord_index(coord, data.d_w)
    return float(np.mean(ccp_gradient(model, data.v, data.w)[:, j]))


def conditional_ape(model, data, coord, region):
    """Average partial effect over the observations in a region.

    region is a vectorized predicate region(v, w) -> bool array, or a
    precomputed boolean mask.  An empty region is an error.
    """
    j = coord_index(coord, data.d_w)
    mask = _region_mask(region, data.v, data.w)
    if not mask.any():
        name = getattr(region, "__name__", repr(region)) if callable(region) else "mask"
        raise ValidationError(f"region {name} selects no observations")
    grads = ccp_gradient(model, data.v[mask], data.w[mask])
    return float(np.mean(grads[:, j]))


def weighted_avg_derivative(model, coord, weight, points, point_density=None):
    """Monte Carlo estimate of int b(x) dp/dx_j dx over points x = (v, w).

    points is a (k, 1 + d_w) array of draws.  When point_density is None the
    points are treated as draws from the weight density b itself; otherwise
    each point is importance-weighted by b(x)/point_density(x).  Warns when b
    is nonzero near the boundary of the sampled hull, where the estimate
    loses support.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != 1 + model.d_w:
        raise ValidationError(
            f"points must have 1 + d_w = {1 + model.d_w} columns, got {pts.shape[1]}"
        )
    j = coord_index(coord, model.d_w)
    v, w = pts[:, 0], pts[:, 1:]
    grads = ccp_gradient(model, v, w)[:, j]
    b_vals = np.asarray(weight(pts), dtype=np.float64)
    if b_vals.shape != (pts.shape[0],):
        raise ValidationError("weight must return one value per point")

    lo, hi = pts.min(axis=0), pts.max(axis=0)
    shell = 0.02 * np.where(hi > lo, hi - lo, 1.0)
    near_edge = np.any((pts <= lo + shell) | (pts >= hi - shell), axis=1)
    if np.any((b_vals > 0) & near_edge):
        warnings.warn(
            "weight is nonzero near the sampled hull boundary; the weighted "
            "derivative may be biased by missing support",
            stacklevel=2,
        )
    if point_density is None:
        return float(np.mean(grads))
    q_vals = np.asarray(point_density(pts), dtype=np.float64)
    if np.any(q_vals <= 0):
        raise ValidationError("point_density must be positive at every point")
    return float(np.mean(b_vals / q_vals * grads))
