"""Column-banded storage plus the small dense solvers used across the package."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse

from . import kernels
from .config import get_tolerances
from .errors import ConfigError, NumericalError, RankDeficientError, SingularMatrixError


@dataclass(frozen=True, eq=False)
class BandMatrix:
    """``values[j, t]`` is entry ``(first_row[j] + t, j)``."""

    rows: int
    cols: int
    first_row: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        fr = np.asarray(self.first_row, dtype=np.int64).copy()
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.ndim != 2 or vals.shape[0] != self.cols or fr.shape != (self.cols,):
            raise ConfigError("band storage shape does not match the column count")
        b = vals.shape[1]
        if self.cols and b and (fr.min() < 0 or fr.max() >= max(self.rows, 1)):
            raise ConfigError("band block starts outside the matrix")
        # the block of a column may overhang the last row only with zeros
        over = fr[:, None] + np.arange(b)[None, :] >= self.rows
        if np.any(vals[over] != 0):
            raise ConfigError("band block overhangs the matrix")
        fr.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "first_row", fr)
        object.__setattr__(self, "values", vals)

    @property
    def bandwidth(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def _coords(self):
        b = self.bandwidth
        r = self.first_row[:, None] + np.arange(b)[None, :]
        c = np.repeat(np.arange(self.cols), b).reshape(self.cols, b)
        keep = r < self.rows
        return r[keep], c[keep], self.values[keep]

    def to_sparse(self) -> sparse.csr_matrix:
        r, c, v = self._coords()
        nz = v != 0
        return sparse.csr_matrix((v[nz], (r[nz], c[nz])), shape=self.shape)

    def matvec(self, v):
        return band_matvec(self, v)

    def rmatvec(self, v):
        """``A.T @ v``."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.rows:
            raise ConfigError(f"dimension mismatch: {self.rows} rows, vector of {v.shape[0]}")
        b = self.bandwidth
        idx = np.minimum(self.first_row[:, None] + np.arange(b)[None, :], max(self.rows - 1, 0))
        if v.ndim == 1:
            return np.einsum("jt,jt->j", self.values, v[idx]) if b else np.zeros(self.cols)
        return np.einsum("jt,jtc->jc", self.values, v[idx]) if b else np.zeros((self.cols,) + v.shape[1:])

    def transpose_dense(self) -> np.ndarray:
        return band_to_dense(self).T

    def column_extent(self, tol: float | None = None):
        """First and last row per column with |entry| > tol (-1 for empty columns)."""
        tol = get_tolerances().band_zero if tol is None else tol
        mask = np.abs(self.values) > tol
        any_ = mask.any(axis=1)
        first = np.where(any_, self.first_row + mask.argmax(axis=1), -1)
        last = np.where(any_, self.first_row + self.bandwidth - 1 - mask[:, ::-1].argmax(axis=1), -1)
        return first, last


def band_matvec(A: BandMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != A.cols:
        raise ConfigError(f"dimension mismatch: {A.cols} columns, vector of {v.shape[0]}")
    out = np.zeros((A.rows,) + v.shape[1:])
    for t in range(A.bandwidth):
        rows = A.first_row + t
        ok = rows < A.rows
        contrib = A.values[ok, t].reshape((-1,) + (1,) * (v.ndim - 1)) * v[ok]
        np.add.at(out, rows[ok], contrib)
    return out


def band_to_dense(A: BandMatrix) -> np.ndarray:
    out = np.zeros(A.shape)
    r, c, v = A._coords()
    out[r, c] = v
    return out


def _from_extents(dense, first, last, bandwidth):
    rows, cols = dense.shape
    fr = np.where(first >= 0, first, 0)
    # keep the block inside the matrix where possible
    fr = np.minimum(fr, max(rows - bandwidth, 0)) if bandwidth else fr
    vals = np.zeros((cols, bandwidth))
    for t in range(bandwidth):
        r = fr + t
        ok = r < rows
        vals[ok, t] = dense[r[ok], np.arange(cols)[ok]]
    return BandMatrix(rows, cols, fr, vals)


def dense_to_band(A, bandwidth: int | None = None, tol: float | None = None) -> BandMatrix:
    """Convert a dense matrix, treating |a| <= tol as zero.

    With ``bandwidth`` given, a column whose nonzeros span more rows than that
    is rejected.
    """
    tol = get_tolerances().band_zero if tol is None else tol
    dense = np.asarray(A, dtype=float)
    if dense.ndim != 2:
        raise ConfigError("dense_to_band expects a 2-D array")
    if not np.all(np.isfinite(dense)):
        raise ConfigError("matrix has non-finite entries")
    rows, cols = dense.shape
    mask = np.abs(dense) > tol
    any_ = mask.any(axis=0)
    first = np.where(any_, mask.argmax(axis=0), -1)
    last = np.where(any_, rows - 1 - mask[::-1].argmax(axis=0), -1)
    spans = np.where(any_, last - first + 1, 0)
    need = int(spans.max()) if cols else 0
    if bandwidth is None:
        bandwidth = need
    elif need > bandwidth:
        bad = int(np.argmax(spans > bandwidth))
        raise ConfigError(
            f"column {bad} has nonzeros over {int(spans[bad])} rows, more than bandwidth {bandwidth}"
        )
    clean = np.where(mask, dense, 0.0)
    return _from_extents(clean, first, last, bandwidth)


def sparse_to_band(A, tol: float | None = None) -> BandMatrix:
    """Band storage of a scipy sparse matrix without a dense detour."""
    tol = get_tolerances().band_zero if tol is None else tol
    csc = sparse.csc_matrix(A)
    csc.sum_duplicates()
    rows, cols = csc.shape
    data = np.where(np.abs(csc.data) > tol, csc.data, 0.0)
    first = np.full(cols, -1, dtype=np.int64)
    last = np.full(cols, -1, dtype=np.int64)
    for j in range(cols):
        seg = slice(csc.indptr[j], csc.indptr[j + 1])
        r = csc.indices[seg][data[seg] != 0]
        if r.size:
            first[j], last[j] = r.min(), r.max()
    b = int((last - first + 1)[first >= 0].max()) if np.any(first >= 0) else 0
    fr = np.where(first >= 0, first, 0)
    fr = np.where(first >= 0, np.minimum(fr, max(rows - b, 0)), 0)
    vals = np.zeros((cols, b))
    for j in range(cols):
        seg = slice(csc.indptr[j], csc.indptr[j + 1])
        r = csc.indices[seg]
        d = data[seg]
        ok = d != 0
        vals[j, r[ok] - fr[j]] = d[ok]
    return BandMatrix(rows, cols, fr, vals)


def svd_values(A, method: str = "auto") -> np.ndarray:
    """Singular values in descending order.

    ``method`` is ``"jacobi"`` (one-sided Jacobi kernel), ``"lapack"`` or
    ``"auto"``, which uses Jacobi up to ``Tolerances.jacobi_max_dim``.
    """
    tol = get_tolerances()
    M = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise ConfigError("svd_values expects a 2-D array")
    if not np.all(np.isfinite(M)):
        raise ConfigError("matrix has non-finite entries")
    if M.size == 0:
        return np.zeros(0)
    if method == "auto":
        method = "jacobi" if min(M.shape) <= tol.jacobi_max_dim else "lapack"
    if method == "lapack":
        return np.linalg.svd(M, compute_uv=False)
    if method != "jacobi":
        raise ConfigError(f"unknown svd method {method!r}")
    # orthogonalise the columns of the thinner orientation
    work = np.array(M.T if M.shape[1] > M.shape[0] else M, dtype=float, order="C")
    scale = np.abs(work).max()
    if scale == 0:
        return np.zeros(min(M.shape))
    work /= scale
    sweeps = kernels.jacobi_sweeps(work, tol.jacobi, tol.jacobi_max_sweeps)
    if sweeps > tol.jacobi_max_sweeps:
        raise NumericalError("Jacobi SVD did not converge", module="bandmat")
    return np.sort(np.linalg.norm(work, axis=0))[::-1] * scale


def solve_dense(A, B) -> np.ndarray:
    """LU with partial pivoting; refuses pivots below ``pivot * max|A|``."""
    M = np.asarray(A, dtype=float)
    rhs = np.asarray(B, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("solve_dense needs a square matrix")
    if rhs.shape[0] != M.shape[0]:
        raise ConfigError("right-hand side does not match the matrix")
    if M.shape[0] == 0:
        return np.zeros_like(rhs)
    amax = np.abs(M).max()
    if amax == 0:
        raise SingularMatrixError("zero matrix", pivot=0, module="bandmat")
    with warnings.catch_warnings():
        # an exactly singular factor is reported below with its pivot
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    diag = np.abs(np.diag(lu))
    small = np.flatnonzero(diag <= get_tolerances().pivot * amax)
    if small.size:
        k = int(small[0])
        raise SingularMatrixError(f"pivot {k} is numerically zero", pivot=k, module="bandmat")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def solve_kkt(Q, c, A_eq=None, b_eq=None):
    """Minimise ``0.5 x'Qx - c'x`` subject to ``A_eq x = b_eq``.

    Returns ``(x, multipliers)`` with stationarity ``Qx - c + A_eq' lambda = 0``.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n) or c.shape != (n,):
        raise ConfigError("Q must be n x n and c of length n")
    if A_eq is None or np.asarray(A_eq).size == 0:
        return solve_dense(Q, c), np.zeros(0)
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b = np.atleast_1d(np.asarray(b_eq, dtype=float))
    k = A.shape[0]
    if A.shape[1] != n or b.shape != (k,):
        raise ConfigError("constraint block does not match Q")
    rn = np.linalg.norm(A, axis=1)
    if np.any(rn == 0):
        raise RankDeficientError("equality constraint with an all-zero row", module="bandmat")
    # rank is judged on unit rows so that scale differences do not count as dependence
    sv = svd_values(A / rn[:, None])
    if k > n or sv[-1] <= get_tolerances().rank * sv[0]:
        raise RankDeficientError("equality constraints are rank deficient", module="bandmat")
    # equilibrate: constraint rows get the magnitude of Q, multipliers are mapped back
    qscale = np.abs(Q).max() or 1.0
    D = qscale / rn
    A = A * D[:, None]
    b = b * D
    K = np.block([[Q, A.T], [A, np.zeros((k, k))]])
    rhs = np.concatenate([c, b])
    try:
        sol = solve_dense(K, rhs)
    except SingularMatrixError as exc:
        raise NumericalError(
            "KKT system singular: Q not positive definite on the constraint nullspace",
            module="bandmat",
            row=exc.pivot,
        ) from exc
    return sol[:n], sol[n:] * D


def csr_arrays(A: sparse.spmatrix):
    """``(indptr, indices, data)`` in the dtypes the kernels expect."""
    csr = sparse.csr_matrix(A)
    return (
        np.ascontiguousarray(csr.indptr, dtype=np.int64),
        np.ascontiguousarray(csr.indices, dtype=np.int64),
        np.ascontiguousarray(csr.data, dtype=float),
    )
