"""
Monte Carlo path simulation and tail metrics.

Each block of paths draws from its own Philox stream keyed by the caller's
key and the block number, so results do not depend on execution order.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from stresslab.config.worker_config import SIMULATION_BLOCK_PATHS
from stresslab.core.errors import InsufficientDataError, NumericalError
from stresslab.core.model import canonical_bytes
from stresslab.risk.covariance import safe_cholesky

logger = logging.getLogger(__name__)

MIN_TAIL_PATHS = 20
CONFIDENCE = 0.95


@dataclass(frozen=True, slots=True)
class Portfolio:
    id: str
    weights: Mapping[str, float]

    def __post_init__(self):
        values = np.array(list(self.weights.values()), dtype=float)
        if values.size == 0 or (values < 0).any() or abs(values.sum() - 1.0) > 1e-12:
            raise ValueError(f"portfolio {self.id} weights must be non-negative and sum to 1")

    def vector(self, assets: Sequence[str]) -> np.ndarray:
        missing = [a for a in self.weights if a not in assets]
        if missing:
            raise ValueError(f"portfolio {self.id} holds assets outside the universe: {missing}")
        return np.array([float(self.weights.get(a, 0.0)) for a in assets])


def portfolio_a() -> Portfolio:
    return Portfolio("A", {"SPY": 0.6, "IEF": 0.3, "GLD": 0.1})


def portfolio_b(sectors: Sequence[str]) -> Portfolio:
    """Equal weights; the last weight absorbs rounding so the sum is exactly 1."""
    n = len(sectors)
    weights = {s: 1.0 / n for s in sectors}
    weights[sectors[-1]] = 1.0 - sum(1.0 / n for _ in sectors[:-1])
    return Portfolio("B", weights)


@dataclass(frozen=True, slots=True)
class TailMetrics:
    var95: float
    cvar95: float
    mdd: float
    mdd_q95: float = 0.0
    channel: str = ""
    n_paths: int = 0


def stream_key(parts: Any) -> list[int]:
    """Stable 128-bit entropy from any canonically serializable value."""
    digest = hashlib.sha256(canonical_bytes(parts)).digest()
    return [int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4)]


def _block_rng(seed: int, key: Sequence[int], block: int) -> np.random.Generator:
    entropy = [int(seed) % (1 << 32), *key, block]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def simulate_paths(
    mu: np.ndarray,
    sigma: np.ndarray,
    n_paths: int,
    horizon: int,
    seed: int,
    return_clip: float,
    portfolios: Mapping[str, np.ndarray],
    key: Sequence[int] = (),
    block_paths: int = SIMULATION_BLOCK_PATHS,
) -> tuple[dict[str, np.ndarray], float]:
    """
    Daily asset returns r_t = mu_t + L z_t, clipped to +-return_clip.
    Portfolio weights drift with holdings and are renormalized every day.

    Returns ({portfolio id: n_paths x horizon returns}, jitter eps).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n_assets = sigma.shape[0]
    if mu.shape != (n_assets, horizon):
        raise NumericalError(f"drift shape {mu.shape} does not match ({n_assets}, {horizon})")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    for pid, w in portfolios.items():
        if np.shape(w) != (n_assets,):
            raise NumericalError(f"portfolio {pid} has {np.shape(w)} weights for {n_assets} assets")

    lower, eps = safe_cholesky(sigma)
    out = {pid: np.empty((n_paths, horizon)) for pid in portfolios}
    drift = mu.T[None, :, :]

    for block, start in enumerate(range(0, n_paths, block_paths)):
        size = min(block_paths, n_paths - start)
        rng = _block_rng(seed, key, block)
        z = rng.standard_normal((size, horizon, n_assets))
        r = np.clip(drift + z @ lower.T, -return_clip, return_clip)
        for pid, w0 in portfolios.items():
            w = np.broadcast_to(np.asarray(w0, dtype=float), (size, n_assets)).copy()
            paths = out[pid]
            for t in range(horizon):
                rt = r[:, t, :]
                paths[start:start + size, t] = (w * rt).sum(axis=1)
                held = w * (1.0 + rt)
                total = held.sum(axis=1, keepdims=True)
                w = np.divide(held, total, out=w, where=total > 0)
    return out, eps


def horizon_losses(paths: np.ndarray) -> np.ndarray:
    return -(np.prod(1.0 + np.asarray(paths, dtype=float), axis=1) - 1.0)


def path_drawdowns(paths: np.ndarray) -> np.ndarray:
    """Per-path maximum peak-to-trough decline (<= 0) of cumulative value from 1."""
    paths = np.asarray(paths, dtype=float)
    value = np.cumprod(1.0 + paths, axis=1)
    value = np.hstack([np.ones((value.shape[0], 1)), value])
    peak = np.maximum.accumulate(value, axis=1)
    return (value / peak - 1.0).min(axis=1)


def var_cvar(losses: np.ndarray, level: float = CONFIDENCE) -> tuple[float, float]:
    """Type-7 (linear interpolation) quantile; CVaR is the mean of losses >= VaR."""
    losses = np.asarray(losses, dtype=float)
    var = float(np.quantile(losses, level, method="linear"))
    tail = losses[losses >= var]
    if tail.size == 0 or tail.max() == tail.min():
        cvar = float(tail[0]) if tail.size else var
    else:
        cvar = float(tail.mean())
    return var, max(var, cvar)


def tail_metrics(paths: np.ndarray, channel: str = "") -> TailMetrics:
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2 or paths.shape[0] < MIN_TAIL_PATHS:
        raise InsufficientDataError(f"tail metrics need at least {MIN_TAIL_PATHS} paths, got {paths.shape[0] if paths.ndim else 0}")
    var, cvar = var_cvar(horizon_losses(paths))
    dd = path_drawdowns(paths)
    mdd = float(min(0.0, dd.mean()))
    mdd_q95 = float(min(0.0, np.quantile(dd, 1.0 - CONFIDENCE, method="linear")))
    return TailMetrics(var, cvar, mdd, mdd_q95, channel, int(paths.shape[0]))


@dataclass(frozen=True, slots=True)
class Multiples:
    var_mult: float
    cvar_mult: float
    dvar_pct: float
    dcvar_pct: float


def multiples(m: TailMetrics, base: TailMetrics) -> Multiples:
    if base.var95 == 0.0 or base.cvar95 == 0.0:
        raise NumericalError("baseline VaR/CVaR is zero; multiples undefined")
    return Multiples(
        var_mult=m.var95 / base.var95,
        cvar_mult=m.cvar95 / base.cvar95,
        dvar_pct=100.0 * (m.var95 - base.var95) / abs(base.var95),
        dcvar_pct=100.0 * (m.cvar95 - base.cvar95) / abs(base.cvar95),
    )
