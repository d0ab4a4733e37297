"""Variance propagation of the coarse-scale projection ``P_L = W_L Wt_L``.

``W_L`` (n_J x n_L) synthesises fine coefficients from s_L and ``Wt_L``
(n_L x n_J) computes s_L. White noise on the fine coefficients leaves
``P_L`` with covariance ``P_L P_L'``; for an orthogonal projection all
nonzero singular values are 1, otherwise some exceed 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .bandmat import solve_dense, svd_values
from .config import get_tolerances
from .errors import ConfigError
from .lifting import analysis_matrices, synthesis_matrices
from .transform import WaveletTransform, _fine_moment_matrix, _optimized_update


@dataclass(frozen=True, eq=False)
class ProjectionReport:
    singular_values: np.ndarray  # all n_J values, descending
    kappa_F: float
    kappa_2: float
    rank: int
    n_L: int
    orthogonal_singular_values: np.ndarray
    variance_margin: float  # min over k of diag(P P')_k - diag(Po Po')_k
    levels: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "kappaF": self.kappa_F,
            "kappa2": self.kappa_2,
            "rank": self.rank,
            "n_L": self.n_L,
            "singular_values": [float(v) for v in self.singular_values],
            "orthogonal_max_deviation": float(np.abs(self.orthogonal_singular_values - 1).max())
            if self.orthogonal_singular_values.size
            else 0.0,
            "variance_margin": self.variance_margin,
            "levels": self.levels,
        }


def _factors(t: WaveletTransform, L: int | None):
    L = t.L if L is None else L
    if not t.L <= L < t.J:
        raise ConfigError(f"projection level {L} outside {t.L}..{t.J - 1}")
    W = sparse.identity(t.n, format="csr")
    Wt = sparse.identity(t.n, format="csr")
    for j in range(t.J - 1, L - 1, -1):
        lev = t.level(j)
        W = W @ lev.H
        Wt = lev.Ht.T @ Wt
    return W.toarray(), Wt.toarray()


def projection_matrix(t: WaveletTransform, L: int | None = None) -> np.ndarray:
    """Dense n_J x n_J ``W_L Wt_L``."""
    W, Wt = _factors(t, L)
    return W @ Wt


def _projection_singular_values(W, Wt):
    """Nonzero singular values of ``W @ Wt`` from the small core ``R1 R2'``."""
    Q1, R1 = np.linalg.qr(W)
    Q2, R2 = np.linalg.qr(Wt.T)
    return svd_values(R1 @ R2.T), Q1


def analyze(t: WaveletTransform, L: int | None = None) -> ProjectionReport:
    W, Wt = _factors(t, L)
    n, nL = W.shape
    core, Q1 = _projection_singular_values(W, Wt)
    tol = get_tolerances().rank
    rank = int(np.sum(core > tol * max(core[0], 1e-300))) if core.size else 0
    sv = np.concatenate([core, np.zeros(n - nL)])
    kF = float(np.sqrt(np.sum(core**2)) / np.sqrt(nL))
    # orthogonal projection onto the same range
    Po = W @ solve_dense(W.T @ W, W.T)
    orth = svd_values(Q1.T @ Po @ Q1)
    P = W @ Wt
    margin = float(np.min(np.einsum("ij,ij->i", P, P) - np.einsum("ij,ij->i", Po, Po)))
    levels = [
        {
            "j": lev.j,
            "n_fine": lev.n_fine,
            "n_coarse": lev.n_coarse,
            "update_nonzeros": int(lev.update.nnz),
            "deficits": {str(k): v for k, v in lev.info.get("deficits", {}).items()},
        }
        for lev in t.levels
        if lev.j >= (t.L if L is None else L)
    ]
    return ProjectionReport(
        singular_values=sv,
        kappa_F=kF,
        kappa_2=float(core[0]) if core.size else 0.0,
        rank=rank,
        n_L=nL,
        orthogonal_singular_values=orth,
        variance_margin=margin,
        levels=levels,
    )


def optimize_final_update(t: WaveletTransform, j: int, p: int, nu: int | None, strict: bool = False):
    """Variance-optimal final update for level ``j`` of ``t``.

    The lifting scheme of level j and all finer levels of ``t`` are kept; the
    squared Frobenius norm of ``W_j Wt_j`` is minimised over U_j with ``nu``
    diagonals (``None``: dense) under ``p`` moment equations. Returns
    ``(U, info)`` with the KKT multipliers and stationarity residual in info.
    """
    lev = t.level(j)
    n = t.n
    analysis = sparse.identity(n, format="csr")
    synthesis = sparse.identity(n, format="csr")
    M = t.fine_moments
    if p > M.shape[1]:
        M = _fine_moment_matrix(t.grid.fine, t.order, t.family, p)
    for jj in range(t.J - 1, j, -1):
        fl = t.level(jj)
        analysis = (fl.Ht.T @ analysis).tocsr()
        synthesis = synthesis @ fl.H
        M = np.asarray(fl.H.T @ M)
    HtT, GtT = analysis_matrices(lev.scheme)
    H, G0 = synthesis_matrices(lev.scheme)
    Mc = np.asarray(H.T @ M)
    O0 = np.asarray(G0.T @ M)
    return _optimized_update(Mc, O0, p, nu, lev.scheme.phase, HtT, GtT, H, analysis, synthesis, strict)


def condition_number(t: WaveletTransform) -> float:
    """Ratio of the extreme singular values of the full forward matrix."""
    A = t.analysis_matrix()
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])
