"""
Calm/crisis covariance estimation, lambda mixing, volatility scaling and a
jittered Cholesky factorization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cholesky

from stresslab.core.errors import CholeskyError, InsufficientDataError
from stresslab.core.model import ChannelParams, MacroShock

logger = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class CovariancePair:
    assets: tuple[str, ...]
    calm: np.ndarray
    crisis: np.ndarray

    def __post_init__(self):
        n = len(self.assets)
        for name in ("calm", "crisis"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValueError(f"{name} covariance shape {m.shape} does not match {n} assets")
            if not np.allclose(m, m.T, atol=1e-12, rtol=0):
                raise ValueError(f"{name} covariance is not symmetric")

    def subset(self, assets: Sequence[str]) -> "CovariancePair":
        pos = {a: i for i, a in enumerate(self.assets)}
        idx = np.array([pos[a] for a in assets])
        return CovariancePair(tuple(assets), self.calm[np.ix_(idx, idx)], self.crisis[np.ix_(idx, idx)])


def estimate_covariance(returns: pd.DataFrame, tickers: Sequence[str], windows: Sequence[tuple[str, str]]) -> np.ndarray:
    """Sample covariance (ddof=1) of daily log returns over the union of windows."""
    mask = np.zeros(len(returns), dtype=bool)
    for start, end in windows:
        mask |= (returns.index >= pd.Timestamp(start)) & (returns.index <= pd.Timestamp(end))
    sample = returns.loc[mask, list(tickers)].dropna(how="any")
    if len(sample) < 2:
        raise InsufficientDataError(f"covariance window {list(windows)} has {len(sample)} complete rows")
    cov = np.cov(sample.to_numpy(dtype=float), rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return (cov + cov.T) / 2.0


def build_covariance_pair(
    returns: pd.DataFrame,
    tickers: Sequence[str],
    calm_window: tuple[str, str],
    crisis_windows: Mapping[str, tuple[str, str]],
) -> CovariancePair:
    calm = estimate_covariance(returns, tickers, [calm_window])
    crisis = estimate_covariance(returns, tickers, list(crisis_windows.values()))
    logger.info(
        f"stage=fit-factors event=covariance_estimated assets={len(tickers)} "
        f"calm_window={calm_window} crisis_windows={sorted(crisis_windows)}"
    )
    return CovariancePair(tuple(tickers), calm, crisis)


def mix_covariance(pair: CovariancePair, lam: float) -> np.ndarray:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        return pair.calm.copy()
    if lam == 1.0:
        return pair.crisis.copy()
    return (1.0 - lam) * pair.calm + lam * pair.crisis


def scale_cov_for_vol_channel(sigma: np.ndarray, shock: MacroShock, params: ChannelParams) -> np.ndarray:
    """Variance multiplier (1 + kappa * max(0, d_inflation))^2; no drift."""
    factor = (1.0 + params.vol_kappa * max(0.0, shock.inflation)) ** 2
    return sigma * factor


def safe_cholesky(sigma: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Lower factor of sigma + eps*I for the first eps on the jitter ladder
    (scaled by the mean diagonal) that factorizes. Returns (L, eps).
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    scale = float(np.mean(np.diag(sigma))) if n else 0.0
    if scale <= 0.0 and not np.any(sigma):
        return np.zeros_like(sigma), 0.0
    scale = abs(scale) or 1.0
    for step in JITTER_LADDER:
        eps = step * scale
        try:
            lower = cholesky(sigma + eps * np.eye(n), lower=True, check_finite=True)
        except LinAlgError:
            continue
        if step:
            logger.debug(f"stage=simulate event=cholesky_jitter eps={eps:.3e}")
        return lower, eps
    raise CholeskyError(f"covariance not positive definite after jitter {JITTER_LADDER[-1]:.0e} x {scale:.3e}")
