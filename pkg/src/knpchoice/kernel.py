"""Gaussian reproducing kernel, gram construction, spectral truncation.

The gram matrix over the centers (w*, W_1, ..., W_n) carries everything the
estimator needs: its eigenpairs define the principal-component parameterization
of the candidate index functions, and the first discarded eigenvalue bounds the
truncation error of that parameterization.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Eigenvalues below RANK_RTOL times the leading one are treated as zero when
# counting the usable rank of a gram matrix.
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class GaussianKernel:
    """k(u, v) = exp(-||u - v||^2 / (2 * bandwidth^2))."""

    bandwidth: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")

    def __call__(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        if u.shape != v.shape:
            raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
        d2 = np.sum((u - v) ** 2)
        return float(np.exp(-0.5 * d2 / self.bandwidth**2))

    def cross(self, a, b):
        """Matrix of k(a_i, b_j) for row-stacked points a (p, d) and b (q, d)."""
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
        d2 = (
            np.sum(a**2, axis=1)[:, None]
            + np.sum(b**2, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        np.maximum(d2, 0.0, out=d2)
        return np.exp(-0.5 * d2 / self.bandwidth**2)

    def grad(self, center, w):
        """Gradient in w of k(center, w): -(w - center) k(center, w) / bandwidth^2."""
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        if center.shape != w.shape:
            raise ValueError(f"dimension mismatch: {center.shape} vs {w.shape}")
        return -(w - center) * self(center, w) / self.bandwidth**2


class GramSystem:
    """Gram matrix over (w*, W_1, ..., W_n) with its full eigendecomposition.

    Eigenvalues are sorted in descending order (stable in the original LAPACK
    index on ties) and clamped at zero; the raw values are kept for
    diagnostics.  Built once per sample and shared across truncation levels.
    """

    def __init__(self, kernel, centers):
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if not np.all(np.isfinite(centers)):
            raise ValueError("kernel centers must be finite")
        self.kernel = kernel
        self.centers = centers
        k_mat = kernel.cross(centers, centers)
        k_mat = 0.5 * (k_mat + k_mat.T)
        np.fill_diagonal(k_mat, 1.0)
        self.matrix = k_mat
        lam, vec = scipy.linalg.eigh(k_mat)
        order = np.argsort(-lam, kind="stable")
        self.eigenvalues_raw = lam[order]
        self.eigenvalues = np.maximum(self.eigenvalues_raw, 0.0)
        self.eigenvectors = vec[:, order]

    @property
    def n_centers(self):
        return self.centers.shape[0]

    def effective_rank(self):
        """Number of eigenvalues above RANK_RTOL times the leading one."""
        lam0 = self.eigenvalues[0]
        if lam0 <= 0.0:
            return 0
        return int(np.sum(self.eigenvalues > RANK_RTOL * lam0))

    def truncate(self, m):
        """Leading m eigenpairs plus the first discarded eigenvalue.

        Returns (u_m, lam_m, lam_next) where u_m is (n_centers, m), lam_m is
        (m,), and lam_next is eigenvalue m (zero when m exhausts the
        spectrum).
        """
        if not 1 <= m <= self.n_centers:
            raise ValueError(f"m must be in [1, {self.n_centers}], got {m}")
        lam_next = float(self.eigenvalues[m]) if m < self.n_centers else 0.0
        return self.eigenvectors[:, :m].copy(), self.eigenvalues[:m].copy(), lam_next


def build_gram(kernel, w_star, w_points):
    """GramSystem over the stacked centers (w*, W_1, ..., W_n)."""
    w_points = np.atleast_2d(np.asarray(w_points, dtype=np.float64))
    w_star = np.atleast_1d(np.asarray(w_star, dtype=np.float64))
    if w_star.shape[0] != w_points.shape[1]:
        raise ValueError(
            f"w_star has dimension {w_star.shape[0]} but points have {w_points.shape[1]}"
        )
    centers = np.vstack([w_star[None, :], w_points])
    return GramSystem(kernel, centers)
