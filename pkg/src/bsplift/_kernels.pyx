# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sparse lifting-row updates, B-spline local values, one-sided Jacobi."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def lift_rows(double[:, ::1] target, const double[:, ::1] source,
              const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
              const double[::1] data, double sign):
    """target[i] += sign * sum_k data[k] * source[indices[k]] for each CSR row i."""
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t ncols = target.shape[1]
    cdef Py_ssize_t i, k, c, src
    cdef double w
    for i in range(nrows):
        for k in range(indptr[i], indptr[i + 1]):
            w = sign * data[k]
            src = indices[k]
            for c in range(ncols):
                target[i, c] += w * source[src, c]


def bspline_local(const double[::1] T, int order, const double[::1] x,
                  const cnp.int64_t[::1] span):
    """Values of the ``order`` B-splines that are nonzero on knot span ``span[p]``.

    Column ``r`` holds N_{span-order+1+r}(x[p]) on knot sequence ``T``.
    """
    cdef Py_ssize_t npts = x.shape[0]
    out = np.zeros((npts, order), dtype=np.float64)
    cdef double[:, ::1] N = out
    cdef double[::1] left = np.zeros(order + 1)
    cdef double[::1] right = np.zeros(order + 1)
    cdef Py_ssize_t p, j, r, i
    cdef double z, saved, temp, den
    for p in range(npts):
        i = span[p]
        z = x[p]
        N[p, 0] = 1.0
        for j in range(1, order):
            left[j] = z - T[i + 1 - j]
            right[j] = T[i + j] - z
            saved = 0.0
            for r in range(j):
                den = right[r + 1] + left[j - r]
                temp = N[p, r] / den if den != 0.0 else 0.0
                N[p, r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            N[p, j] = saved
    return out


def jacobi_sweeps(double[:, ::1] A, double tol, int max_sweeps):
    """Orthogonalise the columns of A in place; returns the sweep count used.

    A returned count above ``max_sweeps`` means no convergence.
    """
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef Py_ssize_t p, q, i
    cdef int sweep
    cdef double alpha, beta, gamma, zeta, t, c, s, ap, aq
    cdef bint rotated
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += A[i, p] * A[i, p]
                    beta += A[i, q] * A[i, q]
                    gamma += A[i, p] * A[i, q]
                if gamma == 0.0 or fabs(gamma) <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    ap = A[i, p]
                    aq = A[i, q]
                    A[i, p] = c * ap - s * aq
                    A[i, q] = s * ap + c * aq
        if not rotated:
            return sweep + 1
    return max_sweeps + 1
