"""RiskMetrics EWMA volatility baseline under a Normal assumption."""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm

from stresslab.baselines.historical import BaselineResult
from stresslab.core.errors import InsufficientDataError

RISKMETRICS_LAMBDA = 0.94
CONFIDENCE = 0.95


def ewma_variance_path(returns: np.ndarray, lam: float = RISKMETRICS_LAMBDA) -> np.ndarray:
    """s_t = lam * s_{t-1} + (1 - lam) * r_t^2 with s_{-1} = 0."""
    r = np.asarray(returns, dtype=float)
    return lfilter([1.0 - lam], [1.0, -lam], r * r)


def ewma_var(
    returns: np.ndarray,
    lam: float = RISKMETRICS_LAMBDA,
    horizon: int = 63,
    window: tuple[str, str] = ("", ""),
) -> BaselineResult:
    """Latest EWMA sigma scaled by sqrt(horizon); CVaR is the Normal tail mean."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise InsufficientDataError("EWMA needs at least 2 returns")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"EWMA decay must lie in (0, 1), got {lam}")
    sigma_t = float(np.sqrt(ewma_variance_path(r, lam)[-1]))
    sigma_h = sigma_t * np.sqrt(horizon)
    z = norm.ppf(CONFIDENCE)
    return BaselineResult(
        method="ewma",
        var95=float(z * sigma_h),
        cvar95=float(sigma_h * norm.pdf(z) / (1.0 - CONFIDENCE)),
        window=window,
        params={"lambda": lam, "horizon": horizon, "sigma_daily": sigma_t, "z": float(z)},
    )
