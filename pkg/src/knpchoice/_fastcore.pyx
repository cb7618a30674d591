# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels: partial normal moments, power-times-density
matrices, squared-polynomial densities and batch CDF evaluation.

Numerically interchangeable with ``_ref_backend``; selected at import time by
``knpchoice.backend``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, fabs, sqrt, M_PI

cnp.import_array()

# Beyond this point the standard normal mass is far below double precision,
# so partial moments are exactly at their limits and densities vanish.
cdef double TAIL_CUTOFF = 38.0

cdef double _INV_SQRT_2PI = 1.0 / sqrt(2.0 * M_PI)
cdef double _INV_SQRT_2 = 1.0 / sqrt(2.0)


cdef inline double _phi(double u) noexcept nogil:
    return _INV_SQRT_2PI * exp(-0.5 * u * u)


cdef inline double _ndtr(double u) noexcept nogil:
    return 0.5 * erfc(-u * _INV_SQRT_2)


def normal_moments(int h_max):
    """Raw moments a_h = E[Z^h] of the standard normal, h = 0..h_max."""
    out = np.zeros(h_max + 1)
    cdef double[::1] a = out
    cdef int h
    a[0] = 1.0
    for h in range(2, h_max + 1, 2):
        a[h] = (h - 1) * a[h - 2]
    return out


def partial_moment_matrix(u, int h_max):
    """Lower partial moments A_h(u) = int_{-inf}^{u} z^h phi(z) dz.

    Returns an (n, h_max+1) array; row i holds A_0(u_i)..A_{h_max}(u_i).
    Rows with u <= -TAIL_CUTOFF are exactly zero, rows with u >= TAIL_CUTOFF
    equal the full normal moments.
    """
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0]
    out = np.empty((n, h_max + 1))
    cdef double[:, ::1] A = out
    cdef double[::1] a = normal_moments(h_max)
    cdef Py_ssize_t i
    cdef int h
    cdef double ui, phi
    with nogil:
        for i in range(n):
            ui = uv[i]
            if ui >= TAIL_CUTOFF:
                for h in range(h_max + 1):
                    A[i, h] = a[h]
                continue
            if ui <= -TAIL_CUTOFF:
                for h in range(h_max + 1):
                    A[i, h] = 0.0
                continue
            phi = _phi(ui)
            A[i, 0] = _ndtr(ui)
            if h_max >= 1:
                A[i, 1] = -phi
            if h_max >= 2:
                A[i, 2] = ui * A[i, 1] + A[i, 0]
            for h in range(3, h_max + 1):
                A[i, h] = ui * (A[i, h - 1] - (h - 2) * A[i, h - 3]) + (h - 1) * A[i, h - 2]
    return out


def power_phi_matrix(u, int h_max):
    """Matrix P[i, h] = u_i^h * phi(u_i), h = 0..h_max (zero in the far tails)."""
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0]
    out = np.empty((n, h_max + 1))
    cdef double[:, ::1] P = out
    cdef Py_ssize_t i
    cdef int h
    cdef double ui, acc
    with nogil:
        for i in range(n):
            ui = uv[i]
            if fabs(ui) > TAIL_CUTOFF:
                for h in range(h_max + 1):
                    P[i, h] = 0.0
                continue
            acc = _phi(ui)
            P[i, 0] = acc
            for h in range(1, h_max + 1):
                acc *= ui
                P[i, h] = acc
    return out


def squared_poly_phi(u, coefs):
    """(sum_r coefs[r] u^r)^2 * phi(u), evaluated in squared-Horner form.

    The squared form keeps the result nonnegative by construction, which the
    equivalent expansion in self-convolved coefficients does not guarantee
    under round-off.
    """
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0]
    cdef int deg = cv.shape[0] - 1
    out = np.empty(n)
    cdef double[::1] f = out
    cdef Py_ssize_t i
    cdef int r
    cdef double ui, p
    with nogil:
        for i in range(n):
            ui = uv[i]
            if fabs(ui) > TAIL_CUTOFF:
                f[i] = 0.0
                continue
            p = cv[deg]
            for r in range(deg - 1, -1, -1):
                p = p * ui + cv[r]
            f[i] = p * p * _phi(ui)
    return out


def cdf_values(u, gamma, double psi):
    """CDF sum_h gamma_h A_h(u) / psi, clipped into [0, 1].

    Fused single pass: the partial-moment recursion runs in scalar registers
    per observation, so no (n, h_max+1) intermediate is materialized.  Beyond
    the tail cutoff the value is pinned to exactly 0 or 1; the moment
    expansion there equals psi only up to summation-order round-off.
    """
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef int h_max = g.shape[0] - 1
    cdef Py_ssize_t n = uv.shape[0]
    out = np.empty(n)
    cdef double[::1] F = out
    cdef Py_ssize_t i
    cdef int h
    cdef double ui, acc, a0, a1, a2, a3
    with nogil:
        for i in range(n):
            ui = uv[i]
            if ui >= TAIL_CUTOFF:
                F[i] = 1.0
                continue
            if ui <= -TAIL_CUTOFF:
                F[i] = 0.0
                continue
            a0 = _ndtr(ui)
            acc = g[0] * a0
            if h_max >= 1:
                a1 = -_phi(ui)
                acc += g[1] * a1
            if h_max >= 2:
                a2 = ui * a1 + a0
                acc += g[2] * a2
            for h in range(3, h_max + 1):
                a3 = ui * (a2 - (h - 2) * a0) + (h - 1) * a1
                acc += g[h] * a3
                a0 = a1
                a1 = a2
                a2 = a3
            acc /= psi
            if acc < 0.0:
                acc = 0.0
            elif acc > 1.0:
                acc = 1.0
            F[i] = acc
    return out
