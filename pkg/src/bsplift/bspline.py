"""Centred B-splines on irregular knots.

Basis function ``k`` of order ``p`` lives on ``[x[k-h], x[k+g])`` with
``h = p // 2`` and ``g = p - h``; indices outside ``0..n-1`` are clamped to
the end knots, so there are exactly ``n`` functions for ``n`` knots. For
order 1 the last function has an empty support.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import ConfigError
from .grid import KnotVector


def half_widths(order: int) -> tuple[int, int]:
    """(h, g) = (floor(p/2), ceil(p/2))."""
    return order // 2, order - order // 2


@dataclass(frozen=True)
class PowerCoefficients:
    order: int
    q: int
    values: np.ndarray


@dataclass(frozen=True)
class MomentVector:
    m: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class BSplineBasis:
    order: int
    knots: KnotVector

    def __post_init__(self):
        if not isinstance(self.knots, KnotVector):
            object.__setattr__(self, "knots", KnotVector.from_values(self.knots))
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError(f"order must be a positive integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if self.knots.n < 2:
            raise ConfigError("a basis needs at least two knots")

    @property
    def n(self) -> int:
        return self.knots.n

    @property
    def x(self) -> np.ndarray:
        return self.knots.knots

    def support(self, k: int) -> tuple[float, float]:
        h, g = half_widths(self.order)
        return float(self.knots.clamped(k - h)), float(self.knots.clamped(k + g))

    @cached_property
    def padded_knots(self) -> np.ndarray:
        """Standard knot sequence with ``order`` spare copies of each end.

        ``phi_k`` is the usual B-spline ``N_{k+order}`` on this sequence.
        """
        h, _ = half_widths(self.order)
        idx = np.arange(self.n + 3 * self.order) - h - self.order
        return np.ascontiguousarray(self.knots.clamped(idx), dtype=float)


def _check_index(basis: BSplineBasis, k: int) -> int:
    if int(k) != k or not 0 <= k < basis.n:
        raise ConfigError(f"basis index {k} out of range 0..{basis.n - 1}")
    return int(k)


def _ratio(num, den):
    # 0/0 (coincident knots) is 0 by convention
    den = np.asarray(den, dtype=float)
    if den == 0:
        return np.zeros_like(num, dtype=float)
    return num / den


def _recursive(basis: BSplineBasis, order: int, start: int, x: np.ndarray) -> np.ndarray:
    """B-spline of ``order`` on knots at (clamped) indices start..start+order."""
    t = basis.knots.clamped(np.arange(start, start + order + 1))
    if order == 1:
        a, b = t
        inside = (x >= a) & (x < b)
        if a < b and b == basis.x[-1]:
            inside |= x == b
        return inside.astype(float)
    left = _recursive(basis, order - 1, start, x)
    right = _recursive(basis, order - 1, start + 1, x)
    return _ratio(x - t[0], t[-2] - t[0]) * left + _ratio(t[-1] - x, t[-1] - t[1]) * right


def eval(basis: BSplineBasis, k: int, x):  # noqa: A001 - name follows the operation
    """Value of basis function ``k`` at ``x`` through the centred recursion."""
    k = _check_index(basis, k)
    xa = np.asarray(x, dtype=float)
    lo, hi = basis.x[0], basis.x[-1]
    if np.any((xa < lo) | (xa > hi)):
        raise ConfigError("evaluation point outside the knot span")
    h, _ = half_widths(basis.order)
    out = _recursive(basis, basis.order, k - h, np.atleast_1d(xa))
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)


def derivative(basis: BSplineBasis, k: int, x):
    """First derivative from the two lower-order neighbours."""
    if basis.order < 2:
        raise ConfigError("derivative needs order >= 2")
    k = _check_index(basis, k)
    xa = np.asarray(x, dtype=float)
    p = basis.order
    h, _ = half_widths(p)
    start = k - h
    t = basis.knots.clamped(np.arange(start, start + p + 1))
    xs = np.atleast_1d(xa)
    left = _recursive(basis, p - 1, start, xs)
    right = _recursive(basis, p - 1, start + 1, xs)
    out = (p - 1) * (_ratio(left, t[-2] - t[0]) - _ratio(right, t[-1] - t[1]))
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)


def interior_interval(basis: BSplineBasis) -> tuple[float, float]:
    p, n = basis.order, basis.n
    if n < 2 * p:
        raise ConfigError(f"interior interval needs n >= 2p ({n} < {2 * p})")
    return float(basis.x[p - 1]), float(basis.x[n - p])


def locate(basis: BSplineBasis, x) -> np.ndarray:
    """Knot interval index per point; the right end belongs to the last interval."""
    xs = np.asarray(x, dtype=float)
    ki = np.searchsorted(basis.x, xs, side="right") - 1
    return np.clip(ki, 0, basis.n - 2)


def local_values(basis: BSplineBasis, x):
    """Nonzero basis values per point.

    Returns ``(first, values)`` where ``values[i, r]`` is ``phi_{first[i]+r}(x[i])``
    and ``first[i]`` may be negative (those columns belong to no function).
    """
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=float)))
    p = basis.order
    h, g = half_widths(p)
    ki = locate(basis, xs)
    span = np.ascontiguousarray(ki + h + p, dtype=np.int64)
    vals = kernels.bspline_local(basis.padded_knots, p, xs, span)
    outside = (xs < basis.x[0]) | (xs > basis.x[-1])
    vals[outside] = 0.0
    return ki - g + 1, vals


def basis_matrix(basis: BSplineBasis, x) -> np.ndarray:
    """Dense ``len(x) x n`` matrix of basis values."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    first, vals = local_values(basis, xs)
    out = np.zeros((xs.size, basis.n))
    rows = np.repeat(np.arange(xs.size), basis.order)
    cols = (first[:, None] + np.arange(basis.order)).ravel()
    keep = (cols >= 0) & (cols < basis.n)
    np.add.at(out, (rows[keep], cols[keep]), vals.ravel()[keep])
    return out


def _sliding_blossoms(values: np.ndarray, order: int, q: int) -> np.ndarray:
    """Coefficient of x^q for every window of ``order - 1`` consecutive knots.

    ``values`` must start with at least ``order`` copies of the same knot: the
    first window then has the closed-form value ``x0**q``, and each later
    window follows from the previous one by swapping a single knot.
    """
    # table[p][qq] holds windows of p-1 knots, indexed by start position
    m = values.size
    prev = None
    for p in range(1, order + 1):
        width = p - 1
        count = m - width + 1 if width > 0 else m
        cur = np.zeros((min(q, p - 1) + 1, count))
        cur[0] = 1.0
        for qq in range(1, min(q, p - 1) + 1):
            row = cur[qq]
            row[0] = values[0] ** qq
            for s in range(1, count):
                row[s] = row[s - 1] + qq / (p - 1) * prev[qq - 1, s] * (values[s + width - 1] - values[s - 1])
        prev = cur
    return prev[q]


def power_coefficients(basis: BSplineBasis, q: int) -> PowerCoefficients:
    """Coefficients of x**q in the basis, through the knot-swap recursion."""
    p = basis.order
    if int(q) != q or not 0 <= q <= p - 1:
        raise ConfigError(f"power degree must be in 0..{p - 1}, got {q}")
    q = int(q)
    if q == 0:
        return PowerCoefficients(p, 0, np.ones(basis.n))
    h, _ = half_widths(p)
    pad = p
    seq = basis.knots.clamped(np.arange(-pad, basis.n + pad))
    coef = _sliding_blossoms(np.asarray(seq, dtype=float), p, q)
    # the window of function k starts at original index k - h + 1
    start = np.arange(basis.n) - h + 1 + pad
    return PowerCoefficients(p, q, coef[start])


def reconstruct_power(basis: BSplineBasis, coeffs: PowerCoefficients, x):
    xa = np.asarray(x, dtype=float)
    out = basis_matrix(basis, np.atleast_1d(xa)) @ np.asarray(coeffs.values, dtype=float)
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)


def gauss_nodes(basis: BSplineBasis, m: int):
    """Per-interval Gauss-Legendre nodes and weights, exact up to degree p-1+m."""
    npts = -(-(basis.order + m) // 2) + 1
    gx, gw = np.polynomial.legendre.leggauss(npts)
    a, b = basis.x[:-1], basis.x[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * gx[None, :]
    weights = half[:, None] * gw[None, :]
    return nodes.ravel(), weights.ravel()


def moment_matrix(basis: BSplineBasis, count: int) -> np.ndarray:
    """``n x count`` array whose column m is the moment vector of degree m."""
    if count < 0:
        raise ConfigError("moment count must be >= 0")
    out = np.zeros((basis.n, count))
    if count == 0:
        return out
    nodes, weights = gauss_nodes(basis, count - 1)
    first, vals = local_values(basis, nodes)
    cols = (first[:, None] + np.arange(basis.order)).ravel()
    keep = (cols >= 0) & (cols < basis.n)
    base = (vals * weights[:, None]).ravel()
    pts = np.repeat(nodes, basis.order)
    for m in range(count):
        out[:, m] = np.bincount(cols[keep], weights=(base * pts ** m)[keep], minlength=basis.n)
    return out


def moments(basis: BSplineBasis, m: int) -> MomentVector:
    """Integrals of ``phi_k(x) * x**m``."""
    if int(m) != m or m < 0:
        raise ConfigError("moment degree must be a non-negative integer")
    return MomentVector(int(m), moment_matrix(basis, int(m) + 1)[:, int(m)])
