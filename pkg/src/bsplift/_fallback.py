"""Numpy versions of the compiled kernels, same signatures and semantics."""
import numpy as np
from scipy import sparse


def lift_rows(target, source, indptr, indices, data, sign):
    op = sparse.csr_matrix((data, indices, indptr), shape=(target.shape[0], source.shape[0]))
    target += sign * (op @ source)


def bspline_local(T, order, x, span):
    npts = x.shape[0]
    N = np.zeros((npts, order))
    N[:, 0] = 1.0
    left = np.zeros((npts, order + 1))
    right = np.zeros((npts, order + 1))
    for j in range(1, order):
        left[:, j] = x - T[span + 1 - j]
        right[:, j] = T[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            safe = np.where(den != 0.0, den, 1.0)
            temp = np.where(den != 0.0, N[:, r] / safe, 0.0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def jacobi_sweeps(A, tol, max_sweeps):
    # round-robin over pairs like the compiled loop, vectorised over rows only
    n = A.shape[1]
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            ap = A[:, p]
            for q in range(p + 1, n):
                aq = A[:, q]
                alpha = ap @ ap
                beta = aq @ aq
                gamma = ap @ aq
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                A[:, p] = new_p
                ap = A[:, p]
        if not rotated:
            return sweep + 1
    return max_sweeps + 1
