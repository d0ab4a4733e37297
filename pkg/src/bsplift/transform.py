"""Multiscale B-spline wavelet transforms built from per-level lifting schemes.

Each level splits ``s_{j+1}`` into a coarse part and details with a lifting
scheme, then applies a final update ``s_j <- s_j + U_j d_j`` that shapes the
wavelets (vanishing moments or low variance propagation). In matrix form

    s_j = Ht_j.T s_{j+1},   d_j = Gt_j.T s_{j+1},   s_{j+1} = H_j s_j + G_j d_j

with ``Ht_j.T = Ht0_j.T + U_j Gt_j.T`` and ``G_j = G0_j - H_j U_j``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import lifting
from .bandmat import BandMatrix, solve_kkt, sparse_to_band
from .bspline import BSplineBasis, moment_matrix
from .config import get_tolerances
from .errors import ConfigError, InfeasibleSparsityError, NumericalError
from .grid import KnotVector, MultilevelGrid, build_multilevel

# --------------------------------------------------------------------------
# design modes


@dataclass(frozen=True)
class DesignMode:
    """``vm``: p vanishing moments. ``opt``: p moments plus minimal variance.

    ``nu`` counts the diagonals of U; ``None`` means a dense U (opt only).
    """

    kind: str = "vm"
    p: int = 1
    nu: int | None = None

    def __post_init__(self):
        if self.kind not in ("vm", "opt"):
            raise ConfigError(f"unknown design mode {self.kind!r}")
        if int(self.p) != self.p or self.p < 0:
            raise ConfigError("number of vanishing moments must be a non-negative integer")
        nu = self.nu
        if nu is None and self.kind == "vm":
            nu = self.p + 2
        if nu is not None and (int(nu) != nu or nu < 0):
            raise ConfigError("nu must be a non-negative integer")
        object.__setattr__(self, "nu", None if nu is None else int(nu))

    @classmethod
    def parse(cls, text: str) -> "DesignMode":
        """``"vm:p=2"``, ``"vm:p=4,nu=6"``, ``"opt:p=2,nu=4"``, ``"opt:p=0,nu=full"``."""
        if isinstance(text, DesignMode):
            return text
        m = re.fullmatch(r"\s*(vm|opt)\s*:\s*(.*)", str(text))
        if not m:
            raise ConfigError(f"mode {text!r} is not of the form vm:p=K or opt:p=K,nu=N")
        kind, rest = m.groups()
        vals = {}
        for part in filter(None, (s.strip() for s in rest.split(","))):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in ("p", "nu") or key in vals or not val.strip():
                raise ConfigError(f"bad mode parameter {part!r} in {text!r}")
            val = val.strip()
            if key == "nu" and val in ("full", "dense"):
                vals[key] = None
                continue
            if not re.fullmatch(r"\d+", val):
                raise ConfigError(f"mode parameter {key} must be an integer, got {val!r}")
            vals[key] = int(val)
        if "p" not in vals:
            raise ConfigError(f"mode {text!r} lacks p=K")
        if kind == "opt" and "nu" not in vals:
            raise ConfigError(f"mode {text!r} lacks nu=N")
        return cls(kind, vals["p"], vals.get("nu"))

    def __str__(self):
        nu = "full" if self.nu is None else self.nu
        return f"{self.kind}:p={self.p},nu={nu}"


# --------------------------------------------------------------------------
# per-level data


@dataclass(frozen=True, eq=False)
class LevelOperators:
    """One split ``n_{j+1} -> (n_j, n_{j+1} - n_j)``; matrices are sparse CSR.

    ``H`` and ``Ht`` are ``n_{j+1} x n_j``; ``G`` and ``Gt`` are
    ``n_{j+1} x (n_{j+1} - n_j)``. ``moments`` holds the coarse scaling moments.
    """

    j: int
    scheme: lifting.LiftingScheme
    update: sparse.csr_matrix
    H: sparse.csr_matrix
    G: sparse.csr_matrix
    Ht: sparse.csr_matrix
    Gt: sparse.csr_matrix
    moments: np.ndarray
    knots: KnotVector
    info: dict = field(default_factory=dict)

    @property
    def n_fine(self) -> int:
        return self.scheme.n

    @property
    def n_coarse(self) -> int:
        return self.scheme.n_even

    def band(self, name: str) -> BandMatrix:
        """Band storage of ``H``, ``G``, ``Ht``, ``Gt`` or ``U``."""
        mats = {"H": self.H, "G": self.G, "Ht": self.Ht, "Gt": self.Gt, "U": self.update}
        if name not in mats:
            raise ConfigError(f"unknown level matrix {name!r}")
        return sparse_to_band(mats[name])

    def forward(self, s):
        even, odd = lifting.apply_forward(self.scheme, s)
        return even + self.update @ odd, odd

    def inverse(self, s, d):
        return lifting.apply_inverse(self.scheme, s - self.update @ d, d)


@dataclass(frozen=True, eq=False)
class CoefficientPyramid:
    """``coarse`` = s_L; ``details[i]`` = d_{L+i}."""

    coarse: np.ndarray
    details: tuple
    L: int
    J: int

    @property
    def total_length(self) -> int:
        return int(self.coarse.shape[0] + sum(d.shape[0] for d in self.details))

    def detail(self, j: int) -> np.ndarray:
        if not self.L <= j < self.J:
            raise ConfigError(f"no details at level {j}")
        return self.details[j - self.L]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.coarse] + list(self.details))


@dataclass(frozen=True, eq=False)
class NondecimatedPyramid:
    """Per level, the detail and scaling vectors of all shift channels.

    ``details[j - L][c]`` belongs to channel ``c``; channel ``2a + b`` at level
    j is the phase-``b`` split of channel ``a`` at level ``j + 1``.
    """

    details: tuple
    scaling: tuple
    L: int
    J: int

    def channel(self, j: int, c: int):
        return self.scaling[j - self.L][c], self.details[j - self.L][c]

    def detail_values(self, j: int) -> np.ndarray:
        return np.concatenate(self.details[j - self.L])

    def scaling_values(self, j: int) -> np.ndarray:
        return np.concatenate(self.scaling[j - self.L])

    def counts(self) -> list[int]:
        return [int(sum(d.shape[0] for d in lev)) for lev in self.details]


@dataclass(frozen=True, eq=False)
class WaveletTransform:
    grid: MultilevelGrid
    order: int
    mode: DesignMode
    levels: tuple  # LevelOperators for j = L..J-1
    family: str = "bspline"
    boundary: str = "clamped"
    fine_moments: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.grid.L

    @property
    def J(self) -> int:
        return self.grid.J

    @property
    def n(self) -> int:
        return self.grid.fine.n

    def level(self, j: int) -> LevelOperators:
        if not self.L <= j < self.J:
            raise ConfigError(f"no split at level {j}")
        return self.levels[j - self.L]

    def forward(self, s):
        return forward(self, s)

    def inverse(self, pyramid):
        return inverse(self, pyramid)

    def analysis_matrix(self) -> np.ndarray:
        """Dense forward matrix: rows of s_L, then d_L .. d_{J-1}."""
        return forward(self, np.eye(self.n)).flatten()

    def synthesis_matrix(self) -> np.ndarray:
        """Dense inverse matrix, columns ordered like ``analysis_matrix`` rows."""
        sizes = [self.grid.n(self.L)] + [lv.n_fine - lv.n_coarse for lv in self.levels]
        eye = np.eye(self.n)
        edges = np.cumsum([0] + sizes)
        dets = tuple(eye[edges[i + 1] : edges[i + 2]] for i in range(len(self.levels)))
        return inverse(self, CoefficientPyramid(eye[: sizes[0]], dets, self.L, self.J))


# --------------------------------------------------------------------------
# final update design


def _update_pattern(n_coarse: int, n_odd: int, phase: int, nu: int | None):
    """``(rows, cols)`` of the admissible nonzeros of U, grouped by column.

    Column m (detail m) takes the first ``nu`` coarse rows of the sequence
    ``base, base+1, base-1, base+2, base-2, ...`` that exist; ``base`` is the
    even neighbour on the left of the detail. Near the ends the sequence runs
    on to the inner side, so every column keeps ``nu`` entries when it can.
    """
    if nu is None:
        r, c = np.meshgrid(np.arange(n_coarse), np.arange(n_odd), indexing="xy")
        return r.ravel(), c.ravel()
    take = min(nu, n_coarse)
    offs = [0]
    for k in range(1, 2 * n_coarse + 2):
        offs.append((k + 1) // 2 if k % 2 else -(k // 2))
    offs = np.array(offs, dtype=int)
    rows, cols = [], []
    for m in range(n_odd):
        base = m if phase == 0 else m - 1
        rr = base + offs
        rr = rr[(rr >= 0) & (rr < n_coarse)][:take]
        rows.append(rr)
        cols.append(np.full(rr.size, m))
    if not rows:
        return np.zeros(0, int), np.zeros(0, int)
    return np.concatenate(rows), np.concatenate(cols)


def banded_entry_count(n_odd: int, nu: int, r: int) -> int:
    """Nonzeros of a strictly banded U with ``nu`` diagonals, clipped at the ends.

    ``r`` is 1 when the finer level has odd length. A value below
    ``p * n_odd`` means such a band cannot carry ``p`` moment equations per
    column; the end-inward pattern used here still can, so this is reported
    rather than enforced.
    """
    return nu * n_odd - (nu // 2) * ((nu + 1) // 2) + r * (nu // 2)


def _band_report(nc, no, p, nu):
    if nu is None:
        return {"band_count": nc * no, "band_shortfall": 0}
    count = banded_entry_count(no, nu, nc - no)
    return {"band_count": count, "band_shortfall": max(0, p * no - count)}


def _moment_system(rows, cols, coarse_moments, prelim, p, strict):
    """Equality block ``A u = b`` of U' M_j = O_j^[0] for the admissible entries.

    A column with fewer than ``p`` free entries only keeps its lowest moments;
    the shortfall is returned as ``{column: missing}``.
    """
    deficits = {}
    A_rows, b = [], []
    for m in np.unique(cols) if cols.size else []:
        ids = np.flatnonzero(cols == m)
        keep = min(p, ids.size)
        if keep < p:
            deficits[int(m)] = p - keep
        for q in range(keep):
            row = np.zeros(rows.size)
            row[ids] = coarse_moments[rows[ids], q]
            A_rows.append(row)
            b.append(prelim[m, q])
    n_odd = prelim.shape[0]
    missing_cols = sorted(set(range(n_odd)) - set(int(c) for c in np.unique(cols)))
    if p > 0:
        for m in missing_cols:
            deficits[m] = p
    if deficits and strict:
        total = sum(deficits.values())
        raise InfeasibleSparsityError(
            f"{len(deficits)} columns of U have too few diagonals for {p} moments",
            deficit=total,
            module="transform",
        )
    A = np.array(A_rows) if A_rows else np.zeros((0, rows.size))
    return A, np.array(b), deficits


def _min_norm_blocks(rows, cols, A, b, n_vars):
    """Minimum-norm solution of the block-diagonal moment system, column by column."""
    u = np.zeros(n_vars)
    if A.shape[0] == 0:
        return u, []
    events = []
    # every constraint row touches a single column of U
    owner = np.array([cols[np.flatnonzero(r)[0]] if np.any(r) else -1 for r in A])
    for m in np.unique(owner):
        if m < 0:
            continue
        eq = np.flatnonzero(owner == m)
        var = np.flatnonzero(cols == m)
        Ab = A[np.ix_(eq, var)]
        bb = b[eq]
        try:
            x, _ = solve_kkt(np.eye(var.size), np.zeros(var.size), Ab, bb)
        except NumericalError:
            # nearly dependent moments: keep the leading independent rows
            x = np.linalg.lstsq(Ab, bb, rcond=get_tolerances().moment_rank)[0]
            events.append(int(m))
        u[var] = x
    return u, events


def compute_final_update_vanishing_moments(
    coarse_moments, prelim_moments, p: int, nu: int | None = None, phase: int = 0, strict: bool = False
):
    """U_j with at most ``nu`` diagonals solving U' M_j = O_j^[0] for moments < p.

    ``coarse_moments`` is M_j (n_j x >=p), ``prelim_moments`` is O_j^[0] =
    G0_j' M_{j+1}. Returns ``(U, info)``; ``info["deficits"]`` lists columns
    that could not reach ``p`` moments (an error when ``strict``).
    """
    Mc = np.asarray(coarse_moments, dtype=float)
    O0 = np.asarray(prelim_moments, dtype=float)
    if Mc.ndim != 2 or O0.ndim != 2:
        raise ConfigError("moment arrays must be two-dimensional")
    if Mc.shape[1] < p or O0.shape[1] < p:
        raise ConfigError(f"need at least {p} moment columns")
    nu = p + 2 if nu is None else nu
    nc, no = Mc.shape[0], O0.shape[0]
    rows, cols = _update_pattern(nc, no, phase, nu)
    A, b, deficits = _moment_system(rows, cols, Mc, O0, p, strict)
    u, events = _min_norm_blocks(rows, cols, A, b, rows.size)
    U = sparse.csr_matrix((u, (rows, cols)), shape=(nc, no))
    info = {"deficits": deficits, "truncated_pivoting": events, "nu": nu, "p": p}
    info.update(_band_report(nc, no, p, nu))
    return U, info


def _dense(M) -> np.ndarray:
    return M.toarray() if sparse.issparse(M) else np.asarray(M)


def _optimized_update(coarse_moments, prelim, p, nu, phase, Ht0T, GtT, H, analysis, synthesis, strict):
    """Variance-optimal U over the admissible pattern, subject to p moment equations.

    The level projection is ``W (A + U B)`` with ``W = synthesis @ H``,
    ``A = Ht0T @ analysis`` and ``B = GtT @ analysis``; its squared Frobenius
    norm is quadratic in the free entries of U.
    """
    nc, no = H.shape[1], GtT.shape[0]
    rows, cols = _update_pattern(nc, no, phase, nu)
    if p > 0:
        A_eq, b_eq, deficits = _moment_system(rows, cols, coarse_moments, prelim, p, strict)
    else:
        A_eq, b_eq, deficits = np.zeros((0, rows.size)), np.zeros(0), {}
    W = _dense(synthesis @ H)
    A = _dense(Ht0T @ analysis)
    B = _dense(GtT @ analysis)
    Q = W.T @ W
    C = B @ B.T
    E = Q @ (A @ B.T)
    hess = Q[np.ix_(rows, rows)] * C[np.ix_(cols, cols)]
    grad = E[rows, cols]
    u, lam = solve_kkt(hess, -grad, A_eq if A_eq.shape[0] else None, b_eq if A_eq.shape[0] else None)
    resid = hess @ u + grad + (A_eq.T @ lam if lam.size else 0.0)
    scale = max(1.0, np.abs(grad).max() if grad.size else 1.0)
    U = sparse.csr_matrix((u, (rows, cols)), shape=(nc, no))
    info = {
        "deficits": deficits,
        "nu": nu,
        "p": p,
        "stationarity_residual": float(np.abs(resid).max() / scale) if resid.size else 0.0,
        "multipliers": lam,
    }
    info.update(_band_report(nc, no, p, nu))
    return U, info


# --------------------------------------------------------------------------
# building


def _dd_scheme(knots: np.ndarray, order: int, phase: int) -> lifting.LiftingScheme:
    """Interpolating scheme: odd values predicted by Lagrange interpolation on
    the ``order`` nearest evens, one-sided near the ends; no update, no scale."""
    m = knots.size
    ev = np.arange(phase, m, 2)
    od = np.arange(1 - phase, m, 2)
    nc = ev.size
    if nc < order:
        raise ConfigError(f"level with {m} knots has fewer than {order} coarse knots")
    P = np.zeros((od.size, nc))
    for r, i in enumerate(od):
        left = np.searchsorted(ev, i) - 1  # coarse index left of the odd knot
        lo = max(0, min(left - order // 2 + 1, nc - order))
        idx = np.arange(lo, lo + order)
        xs = knots[ev[idx]]
        for a, jj in enumerate(idx):
            others = np.delete(xs, a)
            P[r, jj] = np.prod((knots[i] - others) / (xs[a] - others))
    step = lifting.LiftingStep(lifting.PREDICT, P)
    return lifting.LiftingScheme(
        steps=(step,), n=m, phase=phase, order=order, boundary="one-sided", knots=KnotVector(knots)
    )


def _split(knots: KnotVector, order: int, phase: int, family: str, boundary: str):
    if family == "dd":
        return _dd_scheme(knots.knots, order, phase)
    return lifting.design_bspline_scheme(knots, order, phase=phase, boundary=boundary)


def _design_level(j, knots, order, phase, mode, family, boundary, fine_moms, analysis, synthesis, strict):
    scheme = _split(knots, order, phase, family, boundary)
    HtT, GtT = lifting.analysis_matrices(scheme)
    H, G0 = lifting.synthesis_matrices(scheme)
    Mc = np.asarray(H.T @ fine_moms)
    O0 = np.asarray(G0.T @ fine_moms)
    p = mode.p
    if mode.kind == "vm":
        if mode.nu is None:
            raise ConfigError("vanishing-moment mode needs a finite nu")
        U, info = compute_final_update_vanishing_moments(Mc, O0, p, mode.nu, phase, strict)
    else:
        U, info = _optimized_update(Mc, O0, p, mode.nu, phase, HtT, GtT, H, analysis, synthesis, strict)
    U = sparse.csr_matrix(U)
    Ht = (HtT + U @ GtT).T.tocsr()
    G = (G0 - H @ U).tocsr()
    info = dict(info)
    info["phase"] = phase
    info["steps"] = [st.kind for st in scheme.steps]
    lev = LevelOperators(
        j=j,
        scheme=scheme,
        update=U,
        H=H.tocsr(),
        G=G,
        Ht=Ht,
        Gt=GtT.T.tocsr(),
        moments=Mc,
        knots=KnotVector(knots.knots[phase::2], knots.level - 1),
        info=info,
    )
    return lev


def _fine_moment_matrix(fine: KnotVector, order: int, family: str, count: int) -> np.ndarray:
    # the interpolating family is measured against piecewise-linear hats
    basis_order = 2 if family == "dd" else order
    return moment_matrix(BSplineBasis(basis_order, fine), count)


def _build(grid, order, mode, family, boundary, strict, check=True):
    if not isinstance(grid, MultilevelGrid):
        raise ConfigError("build expects a MultilevelGrid")
    mode = DesignMode.parse(mode) if not isinstance(mode, DesignMode) else mode
    if int(order) != order or order < 1:
        raise ConfigError("order must be a positive integer")
    order = int(order)
    if boundary not in lifting.BOUNDARY_MODES:
        raise ConfigError(f"boundary must be one of {lifting.BOUNDARY_MODES}")
    count = max(mode.p, 1)
    M = _fine_moment_matrix(grid.fine, order, family, count)
    n = grid.fine.n
    track = mode.kind == "opt"
    analysis = sparse.identity(n, format="csr") if track else None
    synthesis = sparse.identity(n, format="csr") if track else None
    levels = []
    moms = M
    for j in range(grid.J - 1, grid.L - 1, -1):
        knots = grid.level(j + 1)
        lev = _design_level(j, knots, order, 0, mode, family, boundary, moms, analysis, synthesis, strict)
        levels.append(lev)
        moms = lev.moments
        if track:
            analysis = (lev.Ht.T @ analysis).tocsr()
            synthesis = synthesis @ lev.H
    t = WaveletTransform(
        grid=grid,
        order=order,
        mode=mode,
        levels=tuple(reversed(levels)),
        family=family,
        boundary=boundary,
        fine_moments=M,
    )
    if check:
        for lev in t.levels:
            err = perfect_reconstruction_error(lev)
            if err > 1e-9:
                raise NumericalError(f"level {lev.j} fails perfect reconstruction ({err:.3g})", module="transform")
    return t


def build(grid: MultilevelGrid, order: int, mode="vm:p=1", boundary: str = "clamped", strict: bool = False):
    """Design all levels of a B-spline wavelet transform of order ``order``.

    Levels are designed from the finest split downwards; in ``opt`` mode each
    level sees the already fixed finer levels as data.
    """
    return _build(grid, order, mode, "bspline", boundary, strict)


def design_deslauriers_dubuc(grid: MultilevelGrid, order: int = 4, mode="vm:p=2", strict: bool = False):
    """Interpolating comparison transform: Lagrange prediction of order 2 or 4
    plus the same final-update design."""
    if order not in (2, 4):
        raise ConfigError("Deslauriers-Dubuc order must be 2 or 4")
    return _build(grid, order, mode, "dd", "clamped", strict)


def perfect_reconstruction_error(lev: LevelOperators) -> float:
    """max |H Ht' + G Gt' - I|."""
    R = (lev.H @ lev.Ht.T + lev.G @ lev.Gt.T).toarray()
    R[np.diag_indices_from(R)] -= 1.0
    return float(np.abs(R).max())


def wavelet_moments(t: WaveletTransform, count: int | None = None):
    """``[O_j]`` for j = L..J-1 with O_j = G_j' M_{j+1}, moments 0..count-1."""
    M = t.fine_moments
    if count is not None and count > M.shape[1]:
        M = _fine_moment_matrix(t.grid.fine, t.order, t.family, count)
    count = M.shape[1] if count is None else count
    out = []
    for lev in reversed(t.levels):
        out.append(np.asarray(lev.G.T @ M[:, :count]))
        M = np.asarray(lev.H.T @ M)
    return out[::-1]


# --------------------------------------------------------------------------
# transforms


def _check_len(v, n, what):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0 or a.shape[0] != n:
        raise ConfigError(f"{what} has length {0 if a.ndim == 0 else a.shape[0]}, expected {n}")
    return a


def forward(t: WaveletTransform, s) -> CoefficientPyramid:
    s = _check_len(s, t.n, "input")
    details = []
    for lev in reversed(t.levels):
        s, d = lev.forward(s)
        details.append(d)
    return CoefficientPyramid(s, tuple(reversed(details)), t.L, t.J)


def inverse(t: WaveletTransform, pyramid: CoefficientPyramid) -> np.ndarray:
    if len(pyramid.details) != len(t.levels):
        raise ConfigError(f"pyramid has {len(pyramid.details)} detail levels, transform has {len(t.levels)}")
    s = _check_len(pyramid.coarse, t.grid.n(t.L), "coarse vector")
    for lev, d in zip(t.levels, pyramid.details):
        d = _check_len(d, lev.n_fine - lev.n_coarse, f"details at level {lev.j}")
        s = lev.inverse(s, d)
    return s


def nondecimated_levels(t: WaveletTransform):
    """Per level (finest first), the LevelOperators of every shift channel.

    Channel 0 reuses the decimated levels; the others are designed on their
    own knot subsequences.
    """
    cache = getattr(t, "_nd_cache", None)
    if cache is not None:
        return cache
    fine = t.grid.fine
    n = fine.n
    track = t.mode.kind == "opt"
    eye = sparse.identity(n, format="csr")
    # per channel: (knots, moments, analysis, synthesis)
    chans = [(fine, t.fine_moments, eye if track else None, eye if track else None)]
    out = []
    for j in range(t.J - 1, t.L - 1, -1):
        row = []
        nxt = []
        for a, (knots, moms, an, sy) in enumerate(chans):
            for b in (0, 1):
                if a == 0 and b == 0:
                    lev = t.level(j)
                else:
                    lev = _design_level(j, knots, t.order, b, t.mode, t.family, t.boundary, moms, an, sy, False)
                row.append(lev)
                nan = (lev.Ht.T @ an).tocsr() if track else None
                nsy = (sy @ lev.H) if track else None
                nxt.append((lev.knots, lev.moments, nan, nsy))
        out.append(row)
        chans = nxt
    object.__setattr__(t, "_nd_cache", out)
    return out


def forward_nondecimated(t: WaveletTransform, s) -> NondecimatedPyramid:
    s = _check_len(s, t.n, "input")
    levels = nondecimated_levels(t)
    chans = [s]
    details, scaling = [], []
    for row in levels:
        ds, ss, nxt = [], [], []
        for c, lev in enumerate(row):
            sc, d = lev.forward(chans[c // 2])
            ds.append(d)
            ss.append(sc)
            nxt.append(sc)
        details.append(tuple(ds))
        scaling.append(tuple(ss))
        chans = nxt
    return NondecimatedPyramid(tuple(reversed(details)), tuple(reversed(scaling)), t.L, t.J)


# --------------------------------------------------------------------------
# denoising


def detail_row_norms(t: WaveletTransform):
    """Norms of the rows of the composite map from fine data to each d_j."""
    cache = getattr(t, "_row_norms", None)
    if cache is not None:
        return cache
    pyr = forward(t, np.eye(t.n))
    norms = tuple(np.linalg.norm(d, axis=1) for d in pyr.details)
    object.__setattr__(t, "_row_norms", norms)
    return norms


def soft_threshold(x, lam):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def estimate_noise(t: WaveletTransform, pyramid: CoefficientPyramid) -> float:
    """MAD of the normalised finest details, divided by 0.6745."""
    norms = detail_row_norms(t)[-1]
    d = pyramid.details[-1]
    z = d[norms > 0] / norms[norms > 0]
    if z.size == 0:
        return 0.0
    return float(np.median(np.abs(z - np.median(z))) / 0.6745)


def denoise(t: WaveletTransform, y, threshold="universal", sigma: float | None = None):
    """Soft-threshold all details and reconstruct.

    ``threshold="universal"`` uses ``sigma * ||row|| * sqrt(2 log n_{j+1})``
    per coefficient of d_j; a number is used as ``lambda * ||row||``.
    """
    y = _check_len(y, t.n, "input")
    pyr = forward(t, y)
    if isinstance(threshold, str):
        if threshold != "universal":
            raise ConfigError(f"unknown threshold rule {threshold!r}")
        sig = estimate_noise(t, pyr) if sigma is None else float(sigma)
        lams = [sig * np.sqrt(2.0 * np.log(lev.n_fine)) for lev in t.levels]
    else:
        lam = float(threshold)
        if lam < 0:
            raise ConfigError("threshold must be non-negative")
        lams = [lam] * len(t.levels)
    if all(lam == 0 for lam in lams):
        return inverse(t, pyr)
    norms = detail_row_norms(t)
    dets = tuple(soft_threshold(d, lam * w) for d, lam, w in zip(pyr.details, lams, norms))
    return inverse(t, CoefficientPyramid(pyr.coarse, dets, pyr.L, pyr.J))


def grid_for(knots, n_levels: int) -> MultilevelGrid:
    """Multilevel grid with ``n_levels`` splits over the given fine knots."""
    fine = knots if isinstance(knots, KnotVector) else KnotVector.from_values(knots)
    fine = KnotVector(fine.knots, n_levels)
    return build_multilevel(fine, 0)
