"""Fine-scale coefficients from observations without the wavelet crime.

Function values ``f(x_i)`` are not B-spline coefficients. The presmoother
``S`` maps them to coefficients on an extended knot vector with one
artificial knot beyond each end, keeping every row as close as possible to
the identity while reproducing all polynomials of degree below the order:

    S @ X = Xt,   X[i, q] = x_i**q,   Xt[:, q] = power coefficients of x**q.

Each row is an equality-constrained least-squares problem on a window of
``neighborhood`` consecutive samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .bandmat import BandMatrix, band_matvec, band_to_dense, dense_to_band, solve_kkt
from .bspline import BSplineBasis, power_coefficients
from .errors import ConfigError, NumericalError, RankDeficientError
from .grid import KnotVector


@dataclass(frozen=True, eq=False)
class Presmoother:
    """``S`` is (n+2) x n in band storage; row k belongs to extended knot k-1."""

    S: BandMatrix
    order: int
    neighborhood: int
    knots: KnotVector
    extended: KnotVector
    targets: np.ndarray  # Xt on the extended basis, (n+2) x order
    residuals: np.ndarray  # per-row KKT stationarity residual

    @property
    def n(self) -> int:
        return self.knots.n

    def dense(self) -> np.ndarray:
        return band_to_dense(self.S)

    def variances(self) -> np.ndarray:
        """diag(S S') : coefficient variances for unit white noise."""
        D = self.dense()
        return np.einsum("ij,ij->i", D, D)


def extend_knots(knots: KnotVector) -> KnotVector:
    """Mirror the first and last gaps: x_{-1} = 2x_0 - x_1, x_n = 2x_{n-1} - x_{n-2}."""
    x = knots.knots
    if x.size < 2:
        raise ConfigError("need at least two knots to extend")
    ext = np.concatenate([[2 * x[0] - x[1]], x, [2 * x[-1] - x[-2]]])
    return KnotVector(ext, knots.level)


def _scaled(x, centre, scale):
    return (np.asarray(x, dtype=float) - centre) / scale


def _shift_matrix(order, c, w):
    """T with (X @ T)[:, q] = ((x - c) / w)**q for X[:, r] = x**r."""
    T = np.zeros((order, order))
    for q in range(order):
        for r in range(q + 1):
            T[r, q] = comb(q, r) * (-c) ** (q - r) / w**q
    return T


def build_presmoother(knots, order: int, neighborhood: int | None = None) -> Presmoother:
    """Row-wise minimal ``||S_k - delta_{k-1}||`` subject to polynomial reproduction.

    ``neighborhood`` defaults to ``order + 2``; ``order`` columns leave no
    freedom and fewer cannot satisfy the constraints.
    """
    kv = knots if isinstance(knots, KnotVector) else KnotVector.from_values(knots)
    if int(order) != order or order < 1:
        raise ConfigError("order must be a positive integer")
    order = int(order)
    n = kv.n
    nb = order + 2 if neighborhood is None else int(neighborhood)
    if nb < order:
        raise ConfigError(f"neighborhood {nb} is smaller than the order {order}")
    if nb > n:
        raise ConfigError(f"neighborhood {nb} exceeds the number of knots {n}")
    ext = extend_knots(kv)
    # work in centred coordinates; the polynomial space is unchanged
    centre = 0.5 * (kv.knots[0] + kv.knots[-1])
    scale = 0.5 * (kv.knots[-1] - kv.knots[0])
    xs = _scaled(kv.knots, centre, scale)
    basis = BSplineBasis(order, KnotVector(_scaled(ext.knots, centre, scale)))
    Xt = np.column_stack([power_coefficients(basis, q).values for q in range(order)])
    X = xs[:, None] ** np.arange(order)[None, :]
    S = np.zeros((n + 2, n))
    res = np.zeros(n + 2)
    for k in range(n + 2):
        lo = min(max(k - 1 - (nb - 1) // 2, 0), n - nb)
        cols = np.arange(lo, lo + nb)
        target = (cols == k - 1).astype(float)
        # re-centre on the window: same constraints after a triangular change of basis
        c = 0.5 * (xs[cols[0]] + xs[cols[-1]])
        w = max(0.5 * (xs[cols[-1]] - xs[cols[0]]), np.finfo(float).tiny)
        Tm = _shift_matrix(order, c, w)
        A = (X[cols] @ Tm).T
        try:
            row, lam = solve_kkt(np.eye(nb), target, A, Xt[k] @ Tm)
        except (RankDeficientError, NumericalError) as exc:
            raise RankDeficientError(
                f"polynomial constraints are rank deficient for presmoother row {k}",
                module="finescale",
                row=k,
            ) from exc
        res[k] = np.abs(row - target + A.T @ lam).max()
        S[k, cols] = row
    return Presmoother(
        S=dense_to_band(S, tol=0.0),
        order=order,
        neighborhood=nb,
        knots=kv,
        extended=ext,
        targets=Xt,
        residuals=res,
    )


def constraint_residual(P: Presmoother) -> float:
    """max |S X - Xt| in the centred coordinates used for the design."""
    x = P.knots.knots
    centre, scale = 0.5 * (x[0] + x[-1]), 0.5 * (x[-1] - x[0])
    X = _scaled(x, centre, scale)[:, None] ** np.arange(P.order)[None, :]
    return float(np.abs(band_matvec(P.S, X) - P.targets).max())


def apply_presmoother(P: Presmoother, f) -> np.ndarray:
    """Extended coefficient vector (length n+2) for observations ``f``."""
    f = np.asarray(f, dtype=float)
    if f.ndim == 0 or f.shape[0] != P.n:
        raise ConfigError(f"data has length {0 if f.ndim == 0 else f.shape[0]}, expected {P.n}")
    return band_matvec(P.S, f)
