"""Knot vectors and nested multilevel grids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def _as_knot_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 1:
        raise ConfigError(f"knots must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("knots contain non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KnotVector:
    """Sorted abscissae at one scale.

    Interior values must be strictly increasing. Repeated values are only
    accepted at the two ends, where they act as boundary multiplicity.
    """

    knots: np.ndarray
    level: int = 0

    def __post_init__(self):
        arr = _as_knot_array(self.knots)
        object.__setattr__(self, "knots", arr)
        if arr.size < 1:
            raise ConfigError("a knot vector needs at least one knot")
        gaps = np.diff(arr)
        if np.any(gaps < 0):
            raise ConfigError("knots must be sorted non-decreasing")
        flat = np.flatnonzero(gaps == 0)
        if flat.size:
            lo = arr[0]
            hi = arr[-1]
            inner = [i for i in flat if arr[i] != lo and arr[i] != hi]
            if inner:
                raise ConfigError(f"repeated interior knot at index {inner[0]}")

    @classmethod
    def from_values(cls, values, level: int = 0) -> "KnotVector":
        """Validate user input: length >= 2 and no repeated values at all."""
        kv = cls(values, level)
        if kv.n < 2:
            raise ConfigError("a knot vector needs at least two knots")
        if np.any(np.diff(kv.knots) <= 0):
            raise ConfigError("input knots must be strictly increasing")
        return kv

    @property
    def n(self) -> int:
        return int(self.knots.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, idx):
        return self.knots[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.knots, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.level == other.level and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.level, self.knots.tobytes()))

    def clamped(self, idx):
        """Knot values at (possibly out-of-range) indices, clamped to the ends."""
        idx = np.clip(np.asarray(idx), 0, self.n - 1)
        return self.knots[idx]


@dataclass(frozen=True)
class ExtendedKnots:
    knots: np.ndarray
    offset: int

    def __post_init__(self):
        arr = np.array(self.knots, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "knots", arr)

    def value(self, idx: int) -> float:
        """Value for original index ``idx``, which may lie outside 0..n-1."""
        return float(self.knots[idx + self.offset])


def coarsen(knots: KnotVector) -> KnotVector:
    return KnotVector(knots.knots[::2], knots.level - 1)


def extend_boundary(knots: KnotVector, order: int) -> ExtendedKnots:
    """Replicate the end knots ``order - 1`` times on each side."""
    if order < 1:
        raise ConfigError("order must be >= 1")
    if knots.n < 2:
        raise ConfigError("extend_boundary needs at least two knots")
    rep = order - 1
    x = knots.knots
    ext = np.concatenate([np.full(rep, x[0]), x, np.full(rep, x[-1])])
    return ExtendedKnots(ext, rep)


@dataclass(frozen=True)
class MultilevelGrid:
    """Knot vectors for levels ``L..J``; ``levels[0]`` is the coarsest."""

    levels: tuple
    L: int
    J: int
    parity: tuple = field(init=False)

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) != self.J - self.L + 1:
            raise ConfigError("number of levels does not match L..J")
        for a, b in zip(levels[:-1], levels[1:]):
            if not a.n < b.n:
                raise ConfigError("level sizes must increase strictly with j")
            if a.n != (b.n + 1) // 2 or not np.array_equal(b.knots[::2], a.knots):
                raise ConfigError("levels are not two-nested")
        # r_j = 2 n_j - n_{j+1}: 1 when the finer level has odd length
        par = tuple(2 * a.n - b.n for a, b in zip(levels[:-1], levels[1:]))
        object.__setattr__(self, "parity", par)

    def level(self, j: int) -> KnotVector:
        if not self.L <= j <= self.J:
            raise ConfigError(f"level {j} outside {self.L}..{self.J}")
        return self.levels[j - self.L]

    def n(self, j: int) -> int:
        return self.level(j).n

    @property
    def fine(self) -> KnotVector:
        return self.levels[-1]

    @property
    def coarse(self) -> KnotVector:
        return self.levels[0]

    @property
    def depth(self) -> int:
        return self.J - self.L

    def sizes(self) -> list[int]:
        return [kv.n for kv in self.levels]


def build_multilevel(fine: KnotVector, L: int, min_size: int = 2) -> MultilevelGrid:
    """Coarsen ``fine`` (at level ``fine.level``) down to level ``L``."""
    J = fine.level
    if J - L < 1:
        raise ConfigError("need at least one coarsening (J - L >= 1)")
    if fine.n < 2:
        raise ConfigError("fine grid needs at least two knots")
    levels = [fine]
    for _ in range(J - L):
        levels.append(coarsen(levels[-1]))
    if levels[-1].n < max(min_size, 2):
        raise ConfigError(
            f"coarsest level would have {levels[-1].n} knots, below the minimum {max(min_size, 2)}"
        )
    return MultilevelGrid(tuple(reversed(levels)), L, J)


def grid_from_knots(values, n_levels: int, min_size: int = 2) -> MultilevelGrid:
    """Convenience: fine level ``J = n_levels``, coarsest ``L = 0``."""
    fine = KnotVector.from_values(values, level=n_levels)
    return build_multilevel(fine, 0, min_size)


def check_gap_condition(grid: MultilevelGrid, R: float, beta: float) -> list[bool]:
    """Whether the largest gap at each level obeys ``max gap <= R * n_j**-beta``.

    Diagnostic only; returned in level order L..J.
    """
    if R <= 0 or beta <= 0:
        raise ConfigError("R and beta must be positive")
    out = []
    for kv in grid.levels:
        gap = float(np.max(np.diff(kv.knots))) if kv.n > 1 else 0.0
        out.append(bool(gap <= R * kv.n ** (-beta) * (1 + 1e-12)))
    return out
