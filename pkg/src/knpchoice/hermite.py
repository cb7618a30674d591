"""Squared-polynomial-times-normal error family with closed-form CDFs.

The error density is f(u; tau) = (1 + tau_1 u + ... + tau_J u^J)^2 phi(u) / psi
with phi the standard normal density and psi the normalizing constant.  Its
distribution function is a finite combination of lower partial moments of the
normal, so no numerical integration is ever needed:

    F(u; tau) = sum_{h=0}^{2J} gamma_h A_h(u) / psi,

where gamma is the self-convolution of the coefficient vector (1, tau) and
A_h(u) = int_{-inf}^{u} z^h phi(z) dz follows a three-term recursion.
"""

from collections import namedtuple

import numpy as np

from . import backend

# The partial-moment recursion loses relative accuracy slowly with the order;
# through 2*MAX_ORDER it stays comfortably inside 1e-10 absolute error.
MAX_ORDER = 12

EvalResult = namedtuple("EvalResult", ["cdf", "density", "grad_tau"])


def normal_moments(h_max):
    """Raw moments a_h = E[Z^h] of the standard normal, h = 0..h_max."""
    if h_max < 0:
        raise ValueError("h_max must be nonnegative")
    return backend.normal_moments(int(h_max))


def partial_moments(u, h_max):
    """Lower partial moments A_h(u) for h = 0..h_max.

    Scalar u returns a vector of length h_max+1; an array of shape (n,)
    returns an (n, h_max+1) matrix.
    """
    if h_max < 0:
        raise ValueError("h_max must be nonnegative")
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("evaluation points must be finite")
    out = backend.partial_moment_matrix(np.atleast_1d(arr), int(h_max))
    return out[0] if arr.ndim == 0 else out


def self_convolution(coefs):
    """gamma_h = sum_r coefs_r coefs_{h-r}: coefficients of the squared polynomial."""
    coefs = np.asarray(coefs, dtype=np.float64)
    return np.convolve(coefs, coefs)


def density_from_coefficients(u, coefs):
    """Density (sum_r coefs_r u^r)^2 phi(u) / psi for an arbitrary coefficient
    vector; invariant under rescaling coefs -> c * coefs."""
    coefs = np.asarray(coefs, dtype=np.float64)
    if coefs.ndim != 1 or coefs.size == 0:
        raise ValueError("coefs must be a nonempty 1-D array")
    if not np.any(coefs != 0.0):
        raise ValueError("coefs must not be identically zero")
    gamma = self_convolution(coefs)
    psi = float(gamma @ normal_moments(gamma.size - 1))
    arr = np.asarray(u, dtype=np.float64)
    out = backend.squared_poly_phi(np.atleast_1d(arr), coefs) / psi
    return float(out[0]) if arr.ndim == 0 else out


class HermiteDistribution:
    """Error distribution with density (1 + sum_s tau_s u^s)^2 phi(u) / psi.

    tau of length J = 0 gives exactly the standard normal.  Instances are
    immutable; gamma and psi are precomputed at construction.
    """

    __slots__ = ("tau", "coefs", "gamma", "psi", "_moments")

    def __init__(self, tau=()):
        tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
        if tau.ndim != 1:
            raise ValueError("tau must be a 1-D coefficient vector")
        if tau.size > MAX_ORDER:
            raise ValueError(f"polynomial order {tau.size} exceeds MAX_ORDER={MAX_ORDER}")
        if tau.size and not np.all(np.isfinite(tau)):
            raise ValueError("tau must be finite")
        self.tau = tau
        self.coefs = np.concatenate(([1.0], tau))
        self.gamma = self_convolution(self.coefs)
        self._moments = normal_moments(self.gamma.size - 1)
        self.psi = float(self.gamma @ self._moments)

    @property
    def order(self):
        return self.tau.size

    def __repr__(self):
        return f"HermiteDistribution(tau={self.tau.tolist()})"

    def density(self, u):
        arr = np.asarray(u, dtype=np.float64)
        out = backend.squared_poly_phi(np.atleast_1d(arr), self.coefs) / self.psi
        return float(out[0]) if arr.ndim == 0 else out

    def cdf(self, u):
        arr = np.asarray(u, dtype=np.float64)
        out = backend.cdf_values(np.atleast_1d(arr), self.gamma, self.psi)
        return float(out[0]) if arr.ndim == 0 else out

    def _grad_map(self):
        """Matrix T with T[h, s-1] = d gamma_h / d tau_s = 2 * coefs_{h-s}."""
        j = self.order
        t_mat = np.zeros((2 * j + 1, j))
        for s in range(1, j + 1):
            t_mat[s : s + j + 1, s - 1] = 2.0 * self.coefs
        return t_mat

    def evaluate(self, u, need_grad=False):
        """Batch CDF, density, and (optionally) d cdf / d tau in one pass.

        u must be a 1-D array.  grad_tau has shape (n, J) and is None when
        need_grad is false.
        """
        u = np.ascontiguousarray(u, dtype=np.float64)
        dens = backend.squared_poly_phi(u, self.coefs) / self.psi
        if not need_grad or self.order == 0:
            cdf = backend.cdf_values(u, self.gamma, self.psi)
            grad = np.zeros((u.shape[0], 0)) if need_grad else None
            return EvalResult(cdf, dens, grad)
        a_mat = backend.partial_moment_matrix(u, 2 * self.order)
        cdf = np.clip(a_mat @ self.gamma / self.psi, 0.0, 1.0)
        # Pin the tails exactly; with cdf = 1 the upper-tail gradient rows
        # cancel to zero identically (A_h = a_h there), matching the density.
        cdf[u >= backend.TAIL_CUTOFF] = 1.0
        cdf[u <= -backend.TAIL_CUTOFF] = 0.0
        t_mat = self._grad_map()
        dpsi = self._moments @ t_mat
        grad = (a_mat @ t_mat - np.outer(cdf, dpsi)) / self.psi
        return EvalResult(cdf, dens, grad)

    def cdf_grad_tau(self, u):
        """Gradient of the CDF in tau; shape (J,) for scalar u, (n, J) for arrays."""
        arr = np.asarray(u, dtype=np.float64)
        res = self.evaluate(np.atleast_1d(arr), need_grad=True)
        return res.grad_tau[0] if arr.ndim == 0 else res.grad_tau
