"""NumPy reference implementation of the inner-loop kernels.

Used when the compiled extension is unavailable (or explicitly requested via
KNPCHOICE_BACKEND=numpy).  Must stay numerically interchangeable with
``_fastcore``; the test suite enforces parity on random inputs.
"""

import numpy as np
from scipy.special import ndtr

# Beyond this point the standard normal mass is far below double precision,
# so partial moments are exactly at their limits and densities vanish.
TAIL_CUTOFF = 38.0

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def normal_moments(h_max):
    """Raw moments a_h = E[Z^h] of the standard normal, h = 0..h_max."""
    a = np.zeros(h_max + 1)
    a[0] = 1.0
    for h in range(2, h_max + 1, 2):
        a[h] = (h - 1) * a[h - 2]
    return a


def _phi(u):
    return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def partial_moment_matrix(u, h_max):
    """Lower partial moments A_h(u) = int_{-inf}^{u} z^h phi(z) dz.

    Returns an (n, h_max+1) array; row i holds A_0(u_i)..A_{h_max}(u_i).
    Rows with u <= -TAIL_CUTOFF are exactly zero, rows with u >= TAIL_CUTOFF
    equal the full normal moments.
    """
    u = np.asarray(u, dtype=np.float64)
    uc = np.clip(u, -TAIL_CUTOFF, TAIL_CUTOFF)
    n = u.shape[0]
    out = np.empty((n, h_max + 1))
    phi = _phi(uc)
    out[:, 0] = ndtr(uc)
    if h_max >= 1:
        out[:, 1] = -phi
    if h_max >= 2:
        out[:, 2] = uc * out[:, 1] + out[:, 0]
    for h in range(3, h_max + 1):
        out[:, h] = uc * (out[:, h - 1] - (h - 2) * out[:, h - 3]) + (h - 1) * out[:, h - 2]
    hi = u >= TAIL_CUTOFF
    lo = u <= -TAIL_CUTOFF
    if np.any(hi):
        out[hi] = normal_moments(h_max)
    if np.any(lo):
        out[lo] = 0.0
    return out


def power_phi_matrix(u, h_max):
    """Matrix P[i, h] = u_i^h * phi(u_i), h = 0..h_max (zero in the far tails)."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    out = np.empty((n, h_max + 1))
    inside = np.abs(u) <= TAIL_CUTOFF
    out[:, 0] = np.where(inside, _phi(np.clip(u, -TAIL_CUTOFF, TAIL_CUTOFF)), 0.0)
    uc = np.where(inside, u, 0.0)
    for h in range(1, h_max + 1):
        out[:, h] = out[:, h - 1] * uc
    return out


def squared_poly_phi(u, coefs):
    """(sum_r coefs[r] u^r)^2 * phi(u), evaluated in squared-Horner form.

    The squared form keeps the result nonnegative by construction, which the
    equivalent expansion in self-convolved coefficients does not guarantee
    under round-off.
    """
    u = np.asarray(u, dtype=np.float64)
    coefs = np.asarray(coefs, dtype=np.float64)
    inside = np.abs(u) <= TAIL_CUTOFF
    uc = np.where(inside, u, 0.0)
    p = np.full(u.shape, coefs[-1])
    for c in coefs[-2::-1]:
        p = p * uc + c
    return np.where(inside, p * p * _phi(uc), 0.0)


def cdf_values(u, gamma, psi):
    """CDF sum_h gamma_h A_h(u) / psi, clipped into [0, 1].

    Beyond the tail cutoff the value is pinned to exactly 0 or 1; the moment
    expansion there equals psi only up to summation-order round-off.
    """
    u = np.asarray(u, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    a_mat = partial_moment_matrix(u, gamma.shape[0] - 1)
    out = np.clip(a_mat @ gamma / psi, 0.0, 1.0)
    out[u >= TAIL_CUTOFF] = 1.0
    out[u <= -TAIL_CUTOFF] = 0.0
    return out
