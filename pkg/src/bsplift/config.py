"""Numerical tolerances, kept in one record.

Defaults can be overridden from a JSON file named by the ``BSPLIFT_TOLERANCES``
environment variable, or by passing a path to :func:`load_tolerances`.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from .errors import ConfigError

ENV_VAR = "BSPLIFT_TOLERANCES"


@dataclass(frozen=True)
class Tolerances:
    # pivot threshold for dense LU, relative to max |A|
    pivot: float = 1e-12
    # entries below this are outside a band
    band_zero: float = 1e-14
    # one-sided Jacobi stops when every normalised column inner product is below this
    jacobi: float = 1e-15
    jacobi_max_sweeps: int = 80
    # above this dimension svd_values hands over to LAPACK
    jacobi_max_dim: int = 256
    # singular values below rank * sigma_max count as zero
    rank: float = 1e-10
    # exactness check for lifting rows in boundary="exact" mode
    boundary_residual: float = 1e-10
    # relative threshold for dropping dependent moment equations
    moment_rank: float = 1e-12


_cached: Tolerances | None = None


def load_tolerances(path: str | os.PathLike | None = None) -> Tolerances:
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return Tolerances()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read tolerance file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"tolerance file {path} is not valid JSON: {exc}") from exc
    names = {f.name: f.type for f in dataclasses.fields(Tolerances)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
    return Tolerances(**raw)


def get_tolerances() -> Tolerances:
    global _cached
    if _cached is None:
        _cached = load_tolerances()
    return _cached


def set_tolerances(tol: Tolerances | None) -> None:
    """Replace the process-wide record (``None`` re-reads the environment)."""
    global _cached
    _cached = tol
