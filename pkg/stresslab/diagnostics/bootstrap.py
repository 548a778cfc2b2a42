"""Percentile bootstrap confidence intervals for a sample mean."""
from __future__ import annotations

import numpy as np

from stresslab.core.errors import InsufficientDataError

CHUNK = 1000


def resampled_means(values: np.ndarray, n_resamples: int, seed: int) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty(n_resamples)
    for start in range(0, n_resamples, CHUNK):
        size = min(CHUNK, n_resamples - start)
        idx = rng.integers(0, x.size, size=(size, x.size))
        out[start:start + size] = x[idx].mean(axis=1)
    return out


def bootstrap_ci(values, n_resamples: int = 10000, level: float = 0.95, seed: int = 0) -> tuple[float, float, float]:
    """(mean, lo, hi); lo <= mean <= hi always holds."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"bootstrap CI needs at least 2 values, got {x.size}")
    mean = float(x.mean())
    if np.all(x == x[0]):
        return mean, mean, mean
    means = resampled_means(x, n_resamples, seed)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha], method="linear")
    return mean, float(min(lo, mean)), float(max(hi, mean))
