"""Lifting steps for B-spline refinement on irregular knots.

A fine vector is split by *role*: even-role positions ``phase, phase+2, ...``
carry the coarse scaling coefficients, odd-role positions the details. For
``phase = 0`` these are the usual even and odd indices.

Forward direction, per step:

* predict: ``odd  <- odd  - P @ even``
* update:  ``even <- even + U @ odd``
* scale:   ``even <- even / D``

Each designed row keeps its coefficient equal to ``c_i`` times the blossom
(polar form) of a knot multiset ``K_i``. A step swaps knots in ``K_i`` for
knots taken from the neighbours, so that power coefficients of the fine
B-spline basis end as coarse power coefficients (even rows) and zeros (odd
rows).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy import sparse

from . import kernels
from .bandmat import BandMatrix, csr_arrays, dense_to_band, sparse_to_band
from .bspline import _sliding_blossoms, half_widths
from .config import get_tolerances
from .errors import ConfigError, NumericalError, SingularMatrixError, UnsupportedStructureError
from .grid import KnotVector

PREDICT, UPDATE, SCALE = "predict", "update", "scale"
BOUNDARY_MODES = ("clamped", "exact")


# --------------------------------------------------------------------------
# steps and schemes


@dataclass(frozen=True, eq=False)
class LiftingStep:
    """One factor. ``matrix`` is P (odd x even), U (even x odd) or the diagonal D."""

    kind: str
    matrix: object

    def __post_init__(self):
        if self.kind not in (PREDICT, UPDATE, SCALE):
            raise ConfigError(f"unknown step kind {self.kind!r}")
        if self.kind == SCALE:
            d = np.array(self.matrix, dtype=float)
            if np.any(d == 0) or not np.all(np.isfinite(d)):
                raise SingularMatrixError("scale step with a zero entry", module="lifting")
            d.setflags(write=False)
            object.__setattr__(self, "matrix", d)
        else:
            m = sparse.csr_matrix(self.matrix, dtype=float)
            m.eliminate_zeros()
            m.sort_indices()
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "_csr", csr_arrays(m))

    @property
    def shape(self):
        return (self.matrix.size,) * 2 if self.kind == SCALE else self.matrix.shape

    def rows(self):
        """``[(row, {col: value})]`` for serialisation."""
        if self.kind == SCALE:
            return [(k, {k: float(v)}) for k, v in enumerate(self.matrix)]
        out = []
        m = self.matrix
        for i in range(m.shape[0]):
            seg = slice(m.indptr[i], m.indptr[i + 1])
            out.append((i, {int(j): float(v) for j, v in zip(m.indices[seg], m.data[seg])}))
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.matrix) if self.kind == SCALE else self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class LiftingScheme:
    steps: tuple
    n: int
    phase: int = 0
    order: int | None = None
    u: int | None = None
    r: int | None = None
    r_tilde: int | None = None
    factors: tuple = ()
    boundary: str = "clamped"
    knots: KnotVector | None = None
    notes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        ne, no = self.n_even, self.n_odd
        for st in self.steps:
            want = {PREDICT: (no, ne), UPDATE: (ne, no), SCALE: (ne, ne)}[st.kind]
            if st.shape != want:
                raise ConfigError(f"{st.kind} step has shape {st.shape}, expected {want}")

    @property
    def even_positions(self) -> np.ndarray:
        return np.arange(self.phase, self.n, 2)

    @property
    def odd_positions(self) -> np.ndarray:
        return np.arange(1 - self.phase, self.n, 2)

    @property
    def n_even(self) -> int:
        return len(range(self.phase, self.n, 2))

    @property
    def n_odd(self) -> int:
        return self.n - self.n_even

    @property
    def scale(self) -> np.ndarray:
        d = np.ones(self.n_even)
        for st in self.steps:
            if st.kind == SCALE:
                d = d * st.matrix
        return d

    def coarse_knots(self) -> KnotVector | None:
        if self.knots is None:
            return None
        return KnotVector(self.knots.knots[self.phase :: 2], self.knots.level - 1)


def _as_2d(v, n, what):
    a = np.asarray(v, dtype=float)
    if a.shape[0:1] != (n,):
        raise ConfigError(f"{what} has length {a.shape[0] if a.ndim else 0}, expected {n}")
    return np.array(a.reshape(n, -1), dtype=float, order="C"), a.ndim == 1


def apply_forward(scheme: LiftingScheme, s_fine):
    """Split and lift; returns ``(s_coarse, d)``. Accepts vectors or column stacks."""
    s, flat = _as_2d(s_fine, scheme.n, "input")
    even = np.ascontiguousarray(s[scheme.phase :: 2])
    odd = np.ascontiguousarray(s[1 - scheme.phase :: 2])
    for st in scheme.steps:
        if st.kind == PREDICT:
            kernels.lift_rows(odd, even, *st._csr, -1.0)
        elif st.kind == UPDATE:
            kernels.lift_rows(even, odd, *st._csr, 1.0)
        else:
            even /= st.matrix[:, None]
    if flat:
        return even[:, 0], odd[:, 0]
    return even, odd


def apply_inverse(scheme: LiftingScheme, s_coarse, d):
    even, flat = _as_2d(s_coarse, scheme.n_even, "coarse vector")
    odd, _ = _as_2d(d, scheme.n_odd, "detail vector")
    if even.shape[1] != odd.shape[1]:
        raise ConfigError("coarse and detail inputs have different column counts")
    for st in reversed(scheme.steps):
        if st.kind == PREDICT:
            kernels.lift_rows(odd, even, *st._csr, 1.0)
        elif st.kind == UPDATE:
            kernels.lift_rows(even, odd, *st._csr, -1.0)
        else:
            even *= st.matrix[:, None]
    out = np.empty((scheme.n, even.shape[1]))
    out[scheme.phase :: 2] = even
    out[1 - scheme.phase :: 2] = odd
    return out[:, 0] if flat else out


def _step_operator(scheme, st, inverse=False):
    """Sparse n x n operator of one step in role-sorted order (evens first)."""
    ne, no = scheme.n_even, scheme.n_odd
    if st.kind == SCALE:
        d = 1.0 / st.matrix if not inverse else st.matrix
        return sparse.block_diag([sparse.diags(d), sparse.identity(no)], format="csr")
    sign = -1.0 if inverse else 1.0
    if st.kind == PREDICT:
        return sparse.bmat([[sparse.identity(ne), None], [-sign * st.matrix, sparse.identity(no)]], format="csr")
    return sparse.bmat([[sparse.identity(ne), sign * st.matrix], [None, sparse.identity(no)]], format="csr")


def _role_permutation(scheme):
    # maps natural order to [evens; odds]
    perm = np.concatenate([scheme.even_positions, scheme.odd_positions])
    return sparse.csr_matrix((np.ones(scheme.n), (np.arange(scheme.n), perm)), shape=(scheme.n, scheme.n))


def analysis_matrices(scheme: LiftingScheme):
    """Sparse ``(Ht0.T, Gt.T)``: coarse and detail rows of the forward map."""
    T = _role_permutation(scheme)
    for st in scheme.steps:
        T = _step_operator(scheme, st) @ T
    T = T.tocsr()
    ne = scheme.n_even
    return T[:ne], T[ne:]


def synthesis_matrices(scheme: LiftingScheme):
    """Sparse ``(H, G0)``: columns of the inverse map."""
    W = sparse.identity(scheme.n, format="csr")
    for st in scheme.steps:
        W = W @ _step_operator(scheme, st, inverse=True)
    W = (_role_permutation(scheme).T @ W).tocsr()
    ne = scheme.n_even
    W = W.tocsc()
    return W[:, :ne].tocsr(), W[:, ne:].tocsr()


def assemble_refinement_matrix(scheme: LiftingScheme):
    """``(H, G0, Ht0, Gt)`` as band matrices (Ht0 and Gt are n x coarse / n x odd)."""
    H, G0 = synthesis_matrices(scheme)
    HtT, GtT = analysis_matrices(scheme)
    return (
        sparse_to_band(H),
        sparse_to_band(G0),
        sparse_to_band(HtT.T),
        sparse_to_band(GtT.T),
    )


# --------------------------------------------------------------------------
# B-spline scheme design


def step_sequence(order: int):
    """``(u, r, kinds)``: u update steps, u + r predictions, in forward order."""
    if order < 1:
        raise ConfigError("order must be >= 1")
    u = (order + 1) // 4
    r = -(-order // 2) - 2 * u
    kinds = ([PREDICT] if r == 1 else []) + [UPDATE, PREDICT] * u
    return u, r, kinds


@dataclass(frozen=True)
class _Pattern:
    """Knot swap of one step, in labels relative to the row's representative.

    ``two``: drop b and c, gain a and d (a, b come with the left neighbour,
    c, d with the right one). ``one``: drop b, gain d, using only the neighbour
    on ``side``. ``final``: the odd row is annihilated.
    """

    kind: str
    role: int
    a: int | None = None
    b: int | None = None
    c: int | None = None
    d: int | None = None
    side: str | None = None


def _msub(a, b):
    return list((Counter(a) - Counter(b)).elements())


def _minter(*xs):
    c = Counter(xs[0])
    for x in xs[1:]:
        c &= Counter(x)
    return list(c.elements())


@lru_cache(maxsize=None)
def interior_pattern(order: int) -> tuple:
    """Knot-swap pattern per step for rows away from the boundary.

    Searched depth-first: at every step prefer swapping two knots, then one
    knot from the left, then from the right, and require the last step to
    leave every even row with the coarse knot window and every odd row empty.
    """
    h, g = half_widths(order)
    start = {0: tuple(range(-h + 1, g)), 1: tuple(x + 1 for x in range(-h + 1, g))}
    _, _, kinds = step_sequence(order)
    target = sorted(2 * l for l in range(-h + 1, g))

    def options(kind, K, last):
        role = 1 if kind == PREDICT else 0
        me = list(K[role])
        base = 1 - role
        left = [x - base + (role - 1) for x in K[base]]
        right = [x - base + (role + 1) for x in K[base]]
        S = _minter(me, left, right)
        dm, dl, dr = _msub(me, S), _msub(left, S), _msub(right, S)
        if last:
            if len(dm) == len(dl) == len(dr) <= 1:
                if dm:
                    yield _Pattern("final", role, a=dl[0], b=dm[0], d=dr[0]), None
                else:
                    yield _Pattern("final", role), None
            return
        if len(dm) == len(dl) == len(dr) == 2:
            b = [x for x in dm if x in dl]
            c = [x for x in dm if x in dr]
            if len(b) == 1 and len(c) == 1:
                a = _msub(dl, b)[0]
                d = _msub(dr, c)[0]
                yield _Pattern("two", role, a, b[0], c[0], d), tuple(sorted(S + [a, d]))
        for side, nb, other in (("L", left, right), ("R", right, left)):
            S1 = _minter(me, nb)
            dm1, dn = _msub(me, S1), _msub(nb, S1)
            if len(dm1) == 1 and len(dn) == 1:
                for fresh in sorted(set(_msub(other, me))):
                    pat = _Pattern("one", role, a=dn[0], b=dm1[0], d=fresh, side=side)
                    yield pat, tuple(sorted(S1 + [fresh]))

    def dfs(i, K):
        if i == len(kinds):
            return [] if list(K[0]) == target else None
        for pat, newK in options(kinds[i], K, i == len(kinds) - 1):
            K2 = dict(K)
            K2[pat.role] = newK
            rest = dfs(i + 1, K2)
            if rest is not None:
                return [pat] + rest
        return None

    found = dfs(0, start)
    if found is None:  # pragma: no cover - every order up to 11 is checked in tests
        raise UnsupportedStructureError(f"no lifting pattern for order {order}", module="lifting")
    return tuple(found)


def _blossom_scaled(values, order, ctr, sc):
    """Blossom of the knots for every power q < order, in z = (x - ctr) / sc."""
    z = (np.asarray(values, dtype=float) - ctr) / sc
    e = np.poly(z) if z.size else np.array([1.0])
    return np.array([(-1) ** q * e[q] / comb(order - 1, q) for q in range(order)])


def _frac(num, den, row):
    if den == 0:
        if num == 0:
            return 0.0
        raise NumericalError("zero denominator in lifting factor", module="lifting", row=row)
    return num / den


class _Designer:
    def __init__(self, y, order, phase, boundary):
        self.y = y
        self.m = y.size
        self.order = order
        self.phase = phase
        self.boundary = boundary
        self.h, self.g = half_widths(order)
        self.lo = phase
        self.hi = phase + 2 * ((self.m - 1 - phase) // 2)
        self.notes = []
        if boundary == "exact":
            self.ctr = 0.5 * (y[0] + y[-1])
            self.sc = 0.5 * (y[-1] - y[0])

    def x(self, idx):
        # knot value at a label; exact mode clamps to the coarse range so that
        # the last update lands on the coarse knot windows
        if self.boundary == "exact":
            return float(self.y[min(max(idx, self.lo), self.hi)])
        return float(self.y[min(max(idx, 0), self.m - 1)])

    def role_of(self, i):
        return (i - self.phase) % 2

    def run(self):
        m, order = self.m, self.order
        c = np.ones(m)
        K = {i: [i + o for o in range(-self.h + 1, self.g)] for i in range(m)}
        exact = self.boundary == "exact"
        if exact:
            V = np.array([
                _blossom_scaled([self.y[min(max(k, 0), m - 1)] for k in K[i]], order, self.ctr, self.sc)
                for i in range(m)
            ])
        steps = []
        factors = [c.copy()]
        for pat in interior_pattern(order):
            rows = np.arange(self.phase + pat.role, m, 2) if pat.role == 0 else np.arange(1 - self.phase, m, 2)
            entries = {}
            newc = c.copy()
            if exact:
                newV = V.copy()
            for i in rows:
                i = int(i)
                if exact and pat.role == 1 and pat.kind != "final" and not (self.lo < i < self.hi):
                    continue
                w, cnew, Knew = self._row(pat, i, c, K)
                if exact:
                    desired = (
                        np.zeros(order) if pat.kind == "final"
                        else cnew * _blossom_scaled([self.x(k) for k in Knew], order, self.ctr, self.sc)
                    )
                    w = self._verify_or_solve(i, w, V, desired, pat.role)
                    newV[i] = V[i] + sum(wt * V[j] for j, wt in w.items())
                entries[i] = w
                newc[i] = cnew
                if Knew is not None:
                    K[i] = Knew
            c = newc
            if exact:
                V = newV
            steps.append((pat.role, entries))
            factors.append(c.copy())
        if exact:
            self._check_final(V, c)
        return steps, c, factors

    def _row(self, pat, i, c, K):
        """Interior formula, with the absorbing rule where a neighbour is missing."""
        x = self.x
        sh = i - pat.role
        l, r = i - 1, i + 1
        has_l, has_r = l >= 0, r < self.m
        if pat.kind == "final":
            if pat.b is None:
                lam = 1.0
            else:
                a, b, d = pat.a + sh, pat.b + sh, pat.d + sh
                lam = _frac(x(d) - x(b), x(d) - x(a), i)
            wl, wr = lam, 1.0 - lam
            cnew, Knew = 0.0, None
        elif pat.kind == "two":
            a, b, cc, d = pat.a + sh, pat.b + sh, pat.c + sh, pat.d + sh
            den = x(d) - x(a)
            wl = _frac(x(d) - x(cc), den, i)
            wr = _frac(x(b) - x(a), den, i)
            cnew = c[i] * _frac(x(cc) - x(b), den, i)
            Knew = sorted(_msub(K[i], [b, cc]) + [a, d])
        else:
            a, b, d = pat.a + sh, pat.b + sh, pat.d + sh
            den = x(d) - x(a)
            lam = _frac(x(d) - x(b), den, i)
            wl, wr = (lam, 0.0) if pat.side == "L" else (0.0, lam)
            cnew = c[i] * _frac(x(b) - x(a), den, i)
            Knew = sorted(_msub(K[i], [b]) + [d])
        if not has_l:
            wl, wr = 0.0, wl + wr
        elif not has_r:
            wl, wr = wl + wr, 0.0
        w = {}
        for j, wt in ((l, wl), (r, wr)):
            if wt != 0.0:
                if c[j] == 0:
                    raise NumericalError("lifting factor vanished", module="lifting", row=i)
                w[j] = -wt * c[i] / c[j]
        return w, cnew, Knew

    def _verify_or_solve(self, i, w, V, desired, role):
        tol = get_tolerances().boundary_residual
        cand = V[i] + sum(wt * V[j] for j, wt in w.items())
        scale = max(1.0, np.abs(desired).max(), np.abs(V[i]).max())
        if np.abs(cand - desired).max() <= tol * scale:
            return w
        # smallest set of nearest opposite-role rows that reproduces the state
        other = np.arange(self.phase + (1 - role), self.m, 2) if role == 1 else np.arange(1 - self.phase, self.m, 2)
        order = sorted(other, key=lambda j: (abs(j - i), j))
        rhs = desired - V[i]
        for count in range(self.order, min(len(order), 3 * self.order + 3) + 1):
            nb = sorted(int(j) for j in order[:count])
            A = V[nb].T
            sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
            if np.abs(A @ sol - rhs).max() <= tol * scale:
                self.notes.append(f"row {i}: {count}-term boundary row")
                return {j: float(s) for j, s in zip(nb, sol) if s != 0.0}
        raise NumericalError("no exact boundary row; grid too small", module="lifting", row=i)

    def _check_final(self, V, c):
        h, g = self.h, self.g
        evens = np.arange(self.phase, self.m, 2)
        nc = evens.size
        for k, i in enumerate(evens):
            win = [self.y[evens[min(max(k + l, 0), nc - 1)]] for l in range(-h + 1, g)]
            tgt = c[i] * _blossom_scaled(win, self.order, self.ctr, self.sc)
            if np.abs(V[i] - tgt).max() > 1e-8 * max(1.0, np.abs(tgt).max()):
                raise NumericalError("even row misses its coarse power coefficients", module="lifting", row=int(i))


def design_bspline_scheme(fine_knots, order: int, phase: int = 0, boundary: str = "clamped") -> LiftingScheme:
    """Lifting scheme mapping fine B-spline coefficients to coarse ones.

    ``boundary="clamped"`` (default) keeps every row local: knots beyond the
    ends are replaced by the end knots and a missing neighbour hands its weight
    to the other one. ``boundary="exact"`` re-solves rows near the ends so
    that power coefficients are mapped exactly; those rows are wider.
    """
    kv = fine_knots if isinstance(fine_knots, KnotVector) else KnotVector.from_values(fine_knots)
    if boundary not in BOUNDARY_MODES:
        raise ConfigError(f"boundary must be one of {BOUNDARY_MODES}")
    if phase not in (0, 1):
        raise ConfigError("phase must be 0 or 1")
    order = int(order)
    if order < 1:
        raise ConfigError("order must be >= 1")
    y = kv.knots
    if y.size < 2 * order + 2:
        raise ConfigError(f"need at least {2 * order + 2} fine knots for order {order}, got {y.size}")
    if np.any(np.diff(y) <= 0):
        raise ConfigError("fine knots must be strictly increasing")
    des = _Designer(y, order, phase, boundary)
    raw_steps, c, factors = des.run()
    ev = np.arange(phase, y.size, 2)
    od = np.arange(1 - phase, y.size, 2)
    e_idx = {int(p): k for k, p in enumerate(ev)}
    o_idx = {int(p): k for k, p in enumerate(od)}
    steps = []
    for role, entries in raw_steps:
        rows, cols, vals = [], [], []
        tgt, src = (o_idx, e_idx) if role == 1 else (e_idx, o_idx)
        for i, w in entries.items():
            for j, wt in w.items():
                rows.append(tgt[i])
                cols.append(src[j])
                # rows store "add w * neighbour"; predict matrices hold -w
                vals.append(-wt if role == 1 else wt)
        shape = (len(tgt), len(src))
        mat = sparse.csr_matrix((vals, (rows, cols)), shape=shape)
        steps.append(LiftingStep(PREDICT if role == 1 else UPDATE, mat))
    D = c[ev]
    if np.any(D == 0):
        raise NumericalError("zero rescaling factor", module="lifting", row=int(np.flatnonzero(D == 0)[0]))
    steps.append(LiftingStep(SCALE, D))
    u, r, _ = step_sequence(order)
    return LiftingScheme(
        steps=tuple(steps),
        n=y.size,
        phase=phase,
        order=order,
        u=u,
        r=r,
        r_tilde=order % 2,
        factors=tuple(f.copy() for f in factors),
        boundary=boundary,
        knots=kv,
        notes=tuple(des.notes),
    )


# --------------------------------------------------------------------------
# power-coefficient lifting


def blossom(values, order: int, q: int) -> float:
    """Coefficient of x**q carried by a window of ``order - 1`` knots.

    Computed with the knot-swap recursion, starting from a window of equal
    knots and exchanging one knot at a time.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size != order - 1:
        raise ConfigError(f"need {order - 1} knots, got {vals.size}")
    if not 0 <= q <= order - 1:
        raise ConfigError("q out of range")
    if q == 0:
        return 1.0
    seq = np.concatenate([np.full(order, vals[0]), vals])
    return float(_sliding_blossoms(seq, order, q)[-1])


def knot_swap_coefficient(t_window, q: int, order: int) -> float:
    """Right-hand side of the lifting identity: the scaled coefficient on
    ``{t0, t2, ..., t_{p-2}, tp}``."""
    t = np.asarray(t_window, dtype=float)
    p = order
    if t.size != p + 1:
        raise ConfigError(f"window must hold {p + 1} knots")
    if t[p] == t[0]:
        raise NumericalError("zero-length knot window", module="lifting")
    factor = (t[p - 1] - t[1]) / (t[p] - t[0])
    if p == 2:
        return 0.0 * factor
    swapped = np.concatenate([[t[0]], t[2 : p - 1], [t[p]]])
    return factor * blossom(swapped, p, q)


def lift_power_coefficient(t_window, q: int, order: int, check: bool = True) -> float:
    """Lifted coefficient of one window of ``order + 1`` knots.

    Subtracts the two neighbouring windows with the two lifting weights, and
    (optionally) checks the result against :func:`knot_swap_coefficient`.
    """
    t = np.asarray(t_window, dtype=float)
    p = int(order)
    if p < 2:
        raise ConfigError("order must be >= 2")
    if t.size != p + 1:
        raise ConfigError(f"window must hold {p + 1} knots")
    if not 0 <= q <= p - 1:
        raise ConfigError("q out of range")
    den = t[p] - t[0]
    if den == 0:
        raise NumericalError("zero denominator t_p - t_0", module="lifting")
    w_left = (t[p] - t[p - 1]) / den
    w_right = (t[1] - t[0]) / den
    centre = blossom(t[1:p], p, q)
    left = blossom(t[0 : p - 1], p, q)
    right = blossom(t[2 : p + 1], p, q)
    lifted = centre - w_left * left - w_right * right
    if check:
        other = knot_swap_coefficient(t, q, p)
        scale = max(1.0, np.abs(t).max() ** q)
        if abs(lifted - other) > 1e-10 * scale:
            raise NumericalError("lifted coefficient disagrees with the knot-swap form", module="lifting")
    return float(lifted)


# --------------------------------------------------------------------------
# factorisation of a given refinement matrix


def _row_extents(M, tol):
    mask = np.abs(M) > tol
    any_ = mask.any(axis=1)
    first = np.where(any_, mask.argmax(axis=1), -1)
    last = np.where(any_, M.shape[1] - 1 - mask[:, ::-1].argmax(axis=1), -1)
    return first, last, any_


def _width(first, last, any_):
    return np.where(any_, last - first + 1, 0)


def _reduce_row(target, partners, tol, keep=None, prefer=0):
    """Coefficients on partner rows that shrink ``target`` the most.

    Tries each partner alone and both together, killing the extreme entries
    of the target row; returns ``(coeffs, new_row)`` or ``None``. With
    ``keep`` set, results that lose that column are rejected (even rows must
    end on their diagonal). Ties go to the fewest partners, then to the
    option that clears the left (``prefer=0``) or right (``prefer=1``) end.
    """
    nz = np.flatnonzero(np.abs(target) > tol)
    if nz.size == 0:
        return None
    l1, l2 = nz[0], nz[-1]
    best = None
    base_w = l2 - l1 + 1

    def consider(coeffs):
        nonlocal best
        row = target.copy()
        for (_, prow), a in zip(partners, coeffs):
            row = row + a * prow
        row[np.abs(row) <= tol] = 0.0
        if keep is not None and row[keep] == 0:
            return
        k = np.flatnonzero(row)
        w = 0 if k.size == 0 else k[-1] - k[0] + 1
        used = [i for i, a in enumerate(coeffs) if a != 0]
        key = (w, len(used), 0 if row[(l1, l2)[prefer]] == 0 else 1)
        if w < base_w and (best is None or key < best[0]):
            best = (key, coeffs, row)

    for pi, (_, prow) in enumerate(partners):
        for col in {l1, l2}:
            if abs(prow[col]) > tol:
                coeffs = [0.0] * len(partners)
                coeffs[pi] = -target[col] / prow[col]
                consider(coeffs)
    if len(partners) == 2 and l1 != l2:
        A = np.array([[partners[0][1][l1], partners[1][1][l1]], [partners[0][1][l2], partners[1][1][l2]]])
        if abs(np.linalg.det(A)) > tol * max(1.0, np.abs(A).max()) ** 2:
            coeffs = list(np.linalg.solve(A, -np.array([target[l1], target[l2]])))
            consider(coeffs)
    if best is None:
        return None
    return best[1], best[2]





def _update_candidate(He, Ho, tol, widest_only=False, prefer=0):
    ne, no = He.shape[0], Ho.shape[0]
    U = np.zeros((ne, no))
    w = _width(*_row_extents(He, tol))
    for k in range(ne):
        if widest_only and w[k] < w.max():
            continue
        partners = [(j, Ho[j]) for j in (k - 1, k) if 0 <= j < no]
        res = _reduce_row(He[k], partners, tol, keep=k, prefer=prefer)
        if res is not None:
            for (j, _), a in zip(partners, res[0]):
                U[k, j] = a
    if not U.any():
        return None, None
    out = He + U @ Ho
    out[np.abs(out) <= tol] = 0.0
    return U, out


def _predict_candidate(He, Ho, tol, widest_only=False, prefer=0):
    ne, no = He.shape[0], Ho.shape[0]
    P = np.zeros((no, ne))
    w = _width(*_row_extents(Ho, tol))
    for k in range(no):
        if widest_only and w[k] < w.max():
            continue
        partners = [(j, He[j]) for j in (k, k + 1) if 0 <= j < ne]
        res = _reduce_row(Ho[k], partners, tol, prefer=prefer)
        if res is not None:
            for (j, _), a in zip(partners, res[0]):
                P[k, j] = -a
    if not P.any():
        return None, None
    out = Ho - P @ He
    out[np.abs(out) <= tol] = 0.0
    return P, out


def factor_refinement_matrix(H, max_steps: int = 200, max_nodes: int = 2000) -> LiftingScheme:
    """Factor a refinement matrix (even/odd rows, phase 0) into lifting steps.

    Each update or prediction must shorten the rows it touches; the order of
    steps is found by a depth-first search that prefers working on the wider
    part. The search ends when the odd rows vanish and the even rows are
    diagonal, and the remaining diagonal becomes the scale step.
    """
    if isinstance(H, BandMatrix):
        from .bandmat import band_to_dense

        M = band_to_dense(H)
    elif sparse.issparse(H):
        M = H.toarray()
    else:
        M = np.array(H, dtype=float)
    n, nc = M.shape
    if nc != (n + 1) // 2:
        raise ConfigError(f"refinement matrix of shape {M.shape} does not halve its rows")
    tol = get_tolerances().band_zero * max(1.0, np.abs(M).max())
    He0 = M[0::2].copy()
    Ho0 = M[1::2].copy()
    He0[np.abs(He0) <= tol] = 0.0
    Ho0[np.abs(Ho0) <= tol] = 0.0
    ne = He0.shape[0]
    diag_idx = np.arange(ne)
    budget = [max_nodes]
    dead = {"coprime": False}

    def is_even_diag(He):
        f, _, a = _row_extents(He, tol)
        return bool(np.all(_width(*_row_extents(He, tol)) <= 1) and np.all(np.where(a, f == diag_idx, True)))

    failed = set()

    def search(He, Ho, depth):
        budget[0] -= 1
        if budget[0] < 0 or depth > max_steps:
            return None
        state = He.tobytes() + Ho.tobytes()
        if state in failed:
            return None
        even_diag = is_even_diag(He)
        if not np.any(Ho) and even_diag:
            return He, []
        if not np.any(Ho):
            dead["coprime"] = True
            return None
        we = _width(*_row_extents(He, tol))
        wo = _width(*_row_extents(Ho, tol))
        ups, preds = [], []
        for widest, prefer in ((False, 0), (True, 0), (False, 1), (True, 1)):
            if not even_diag:
                U, newHe = _update_candidate(He, Ho, tol, widest, prefer)
                if U is not None and _width(*_row_extents(newHe, tol)).sum() < we.sum():
                    ups.append((UPDATE, U, newHe, Ho))
            P, newHo = _predict_candidate(He, Ho, tol, widest, prefer)
            if P is not None and _width(*_row_extents(newHo, tol)).sum() < wo.sum():
                preds.append((PREDICT, P, He, newHo))
        options = ups + preds if (not even_diag and we.max() >= wo.max()) else preds + ups
        seen = set()
        for kind, mat, nHe, nHo in options:
            key = mat.tobytes()
            if key in seen:
                continue
            seen.add(key)
            found = search(nHe, nHo, depth + 1)
            if found is not None:
                return found[0], [LiftingStep(kind, mat)] + found[1]
        failed.add(state)
        return None

    found = search(He0, Ho0, 0)
    if found is None:
        if dead["coprime"]:
            raise SingularMatrixError(
                "odd part vanished before the even part became diagonal: even and odd columns are not coprime",
                module="lifting",
            )
        raise UnsupportedStructureError("no sequence of lifting steps reduces this matrix", module="lifting")
    He, steps = found
    D = np.diag(He).copy()
    small = np.flatnonzero(np.abs(D) <= get_tolerances().pivot * max(1.0, np.abs(M).max()))
    if small.size:
        raise SingularMatrixError("zero diagonal in the rescaling step", pivot=int(small[0]), module="lifting")
    # forward steps turn H into [D; 0]; the scheme divides evens by D last
    steps.append(LiftingStep(SCALE, D))
    return LiftingScheme(steps=tuple(steps), n=n, phase=0, boundary="factored")
