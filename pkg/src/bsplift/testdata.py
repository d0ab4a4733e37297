"""Reproducible knots and signals for examples and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError

KINDS = ("uniform-knots", "equispaced-knots", "piecewise-smooth-signal", "noisy-signal")
DEFAULT_SEED = 42


def uniform_knots(n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """``n`` sorted independent U(0, 1) draws."""
    if n < 2:
        raise ConfigError("need at least two knots")
    return np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, n))


def equispaced_knots(n: int) -> np.ndarray:
    if n < 2:
        raise ConfigError("need at least two knots")
    return np.arange(n) / (n - 1)


def piecewise_smooth(x) -> np.ndarray:
    """Smooth pieces with a jump at 0.4 and a kink at 0.7."""
    x = np.asarray(x, dtype=float)
    return np.where(
        x < 0.4,
        np.sin(6.0 * x),
        np.where(x < 0.7, 1.2 - 2.0 * x, -0.2 + 0.5 * (x - 0.7) ** 2),
    )


def noisy_signal(x, sigma: float = 0.1, seed: int = DEFAULT_SEED) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return piecewise_smooth(x) + sigma * np.random.default_rng(seed).standard_normal(x.shape)


def generate(kind: str, n: int, seed: int = DEFAULT_SEED, sigma: float = 0.1) -> dict:
    """Columns for one CSV file. Signals are sampled at uniform random knots."""
    if kind == "uniform-knots":
        return {"x": uniform_knots(n, seed)}
    if kind == "equispaced-knots":
        return {"x": equispaced_knots(n)}
    if kind == "piecewise-smooth-signal":
        x = uniform_knots(n, seed)
        return {"x": x, "value": piecewise_smooth(x)}
    if kind == "noisy-signal":
        x = uniform_knots(n, seed)
        # a derived stream keeps the noise independent of the knot draw
        return {"x": x, "value": noisy_signal(x, sigma, seed + 1)}
    raise ConfigError(f"unknown test data kind {kind!r}; choose from {', '.join(KINDS)}")
