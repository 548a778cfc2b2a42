"""
PCA factor model over (SPY, IEF, GLD): sign-aligned loadings, linear and
capped polynomial betas, and the macro-shock drifts built from them.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from stresslab.core.errors import FactorModelError
from stresslab.core.model import ChannelParams, MacroShock

logger = logging.getLogger(__name__)

FACTOR_ASSETS = ("SPY", "IEF", "GLD")
# PC1 -> SPY, PC2 -> GLD, PC3 -> IEF (column indices into FACTOR_ASSETS)
ANCHOR_COLUMNS = (0, 2, 1)
MIN_OBSERVATIONS = 30
RIDGE = 1e-10
POLY_TERMS = ("f1", "f2", "f3", "f1^2", "f2^2", "f3^2", "f1*f2", "f1*f3", "f2*f3")


@dataclass(frozen=True)
class PcaFactors:
    loadings: np.ndarray        # 3x3, rows are PC1..PC3
    factor_scores: np.ndarray   # T x 3
    factor_std: np.ndarray      # 3
    eigenvalues: np.ndarray     # 3, descending
    mean: np.ndarray            # 3, column means removed before projection
    columns: tuple[str, ...] = FACTOR_ASSETS
    seed: int = 0

    def project(self, returns: np.ndarray) -> np.ndarray:
        return (np.asarray(returns, dtype=float) - self.mean) @ self.loadings.T


@dataclass(frozen=True)
class BetaSet:
    assets: tuple[str, ...]
    linear: np.ndarray      # N x 3
    poly: np.ndarray        # N x 9, ordered as POLY_TERMS
    caps: np.ndarray        # N
    intercept_linear: np.ndarray
    intercept_poly: np.ndarray
    ridge_fallback: tuple[bool, ...]

    def index(self, assets: Sequence[str]) -> np.ndarray:
        pos = {a: i for i, a in enumerate(self.assets)}
        missing = [a for a in assets if a not in pos]
        if missing:
            raise FactorModelError(f"no betas for assets: {missing}")
        return np.array([pos[a] for a in assets])

    def subset(self, assets: Sequence[str]) -> "BetaSet":
        idx = self.index(assets)
        return BetaSet(
            tuple(assets), self.linear[idx], self.poly[idx], self.caps[idx],
            self.intercept_linear[idx], self.intercept_poly[idx],
            tuple(self.ridge_fallback[i] for i in idx),
        )


def fit_pca(returns: np.ndarray, seed: int = 0, columns: Sequence[str] = FACTOR_ASSETS) -> PcaFactors:
    """
    Eigen-decomposition of the sample covariance, components by descending
    eigenvalue, signs flipped so each anchor asset loads positively.
    """
    x = np.asarray(returns, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise FactorModelError(f"expected T x 3 returns, got shape {x.shape}")
    if x.shape[0] < MIN_OBSERVATIONS:
        raise FactorModelError(f"PCA needs at least {MIN_OBSERVATIONS} observations, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise FactorModelError("PCA input contains non-finite returns")

    mean = x.mean(axis=0)
    xc = x - mean
    cov = np.cov(xc, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    if evals[-1] <= max(evals[0], 0.0) * 1e-12:
        null = evecs[:, -1]
        bad = columns[int(np.argmax(np.abs(null)))]
        raise FactorModelError(f"rank-deficient factor covariance; degenerate column: {bad}")

    loadings = evecs.T.copy()
    for k, col in enumerate(ANCHOR_COLUMNS):
        anchor = loadings[k, col]
        if anchor == 0.0:
            raise FactorModelError(f"PC{k + 1} has zero loading on anchor {columns[col]}")
        if anchor < 0.0:
            loadings[k] = -loadings[k]

    scores = xc @ loadings.T
    factor_std = scores.std(axis=0, ddof=1)
    logger.info(
        f"stage=fit-factors event=pca_fitted obs={x.shape[0]} "
        f"explained={np.round(evals / evals.sum(), 4).tolist()}"
    )
    return PcaFactors(loadings, scores, factor_std, evals, mean, tuple(columns), int(seed))


def poly_basis(f: np.ndarray) -> np.ndarray:
    """9-term basis: linear, squares, cross terms."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    f1, f2, f3 = f[:, 0], f[:, 1], f[:, 2]
    return np.column_stack([f1, f2, f3, f1**2, f2**2, f3**2, f1 * f2, f1 * f3, f2 * f3])


def _ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    rank = np.linalg.matrix_rank(design)
    if rank == design.shape[1]:
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        return coef, False
    gram = design.T @ design + RIDGE * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ y), True


def fit_betas(
    asset_returns: np.ndarray,
    factors: PcaFactors,
    assets: Sequence[str] | None = None,
    drift_cap_daily: float = ChannelParams().drift_cap_daily,
) -> BetaSet:
    """
    Per-asset OLS (intercept included, not used for drift) on the factor
    scores and on the polynomial basis. A collinear design falls back to a
    tiny ridge and is flagged.
    """
    y_all = np.asarray(asset_returns, dtype=float)
    if y_all.ndim == 1:
        y_all = y_all[:, None]
    scores = factors.factor_scores
    if y_all.shape[0] != scores.shape[0]:
        raise FactorModelError(f"asset returns ({y_all.shape[0]} rows) not aligned with factor scores ({scores.shape[0]})")
    assets = tuple(assets) if assets is not None else tuple(f"asset{i}" for i in range(y_all.shape[1]))

    ones = np.ones((scores.shape[0], 1))
    lin_design = np.hstack([ones, scores])
    poly_design = np.hstack([ones, poly_basis(scores)])

    n = y_all.shape[1]
    linear = np.zeros((n, 3))
    poly = np.zeros((n, 9))
    icpt_lin = np.zeros(n)
    icpt_poly = np.zeros(n)
    flags = []
    for i in range(n):
        mask = np.isfinite(y_all[:, i])
        coef_lin, ridge_lin = _ols(lin_design[mask], y_all[mask, i])
        coef_poly, ridge_poly = _ols(poly_design[mask], y_all[mask, i])
        icpt_lin[i], linear[i] = coef_lin[0], coef_lin[1:]
        icpt_poly[i], poly[i] = coef_poly[0], coef_poly[1:]
        flags.append(bool(ridge_lin or ridge_poly))
        if flags[-1]:
            logger.warning(f"stage=fit-factors event=ridge_fallback asset={assets[i]} ridge={RIDGE}")

    caps = np.full(n, float(drift_cap_daily))
    return BetaSet(assets, linear, poly, caps, icpt_lin, icpt_poly, tuple(flags))


def macro_to_factor(shock: MacroShock) -> np.ndarray:
    """Non-negative factor shock: recession on PC1, inflation on PC2, hikes on PC3."""
    return np.array([
        max(0.0, -shock.gdp_growth / 100.0),
        max(0.0, shock.inflation / 100.0),
        max(0.0, shock.interest_rate / 100.0),
    ])


def _decay_profile(horizon_days: int, decay: float) -> np.ndarray:
    return decay ** np.arange(horizon_days, dtype=float)


def _normalized(delta_f: np.ndarray, factor_std: np.ndarray) -> np.ndarray:
    factor_std = np.asarray(factor_std, dtype=float)
    if np.any(factor_std == 0.0):
        raise FactorModelError("factor standard deviation has a zero component")
    return np.asarray(delta_f, dtype=float) / factor_std


def linear_drift(betas: BetaSet, delta_f: np.ndarray, factor_std: np.ndarray, horizon_days: int, decay: float) -> np.ndarray:
    """assets x horizon; day-1 drift is betas . (dF / sigma_F) / H, then geometric decay."""
    if np.any(np.asarray(delta_f) < 0):
        raise ValueError("factor shock must be non-negative")
    day1 = betas.linear @ _normalized(delta_f, factor_std) / horizon_days
    return np.outer(day1, _decay_profile(horizon_days, decay))


def nonlinear_drift(
    betas: BetaSet,
    delta_f: np.ndarray,
    lam: float,
    rag: bool,
    use_news: bool,
    params: ChannelParams,
    factor_std: np.ndarray,
    horizon_days: int,
) -> np.ndarray:
    """
    Polynomial drift at dF / sigma_F spread over the horizon, capped per
    asset, scaled by the amplification term, then decayed.
    """
    z = _normalized(delta_f, factor_std)
    raw = betas.poly @ poly_basis(z)[0] / horizon_days
    cap = np.minimum(betas.caps, params.drift_cap_daily)
    capped = np.clip(raw, -cap, cap)
    amp = params.amplification(lam, rag, use_news)
    return np.outer(capped * amp, _decay_profile(horizon_days, params.drift_decay))


def save_factor_model(path: str | Path, factors: PcaFactors, betas: BetaSet) -> Path:
    """JSON form without the score series (those are rebuilt from prices)."""
    payload = {
        "columns": list(factors.columns),
        "seed": factors.seed,
        "loadings": factors.loadings.tolist(),
        "factor_std": factors.factor_std.tolist(),
        "eigenvalues": factors.eigenvalues.tolist(),
        "mean": factors.mean.tolist(),
        "assets": list(betas.assets),
        "linear": betas.linear.tolist(),
        "poly": betas.poly.tolist(),
        "poly_terms": list(POLY_TERMS),
        "caps": betas.caps.tolist(),
        "intercept_linear": betas.intercept_linear.tolist(),
        "intercept_poly": betas.intercept_poly.tolist(),
        "ridge_fallback": list(betas.ridge_fallback),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_factor_model(path: str | Path) -> tuple[PcaFactors, BetaSet]:
    with open(path, "r", encoding="utf-8") as f:
        d = json.load(f)
    factors = PcaFactors(
        loadings=np.array(d["loadings"]),
        factor_scores=np.zeros((0, 3)),
        factor_std=np.array(d["factor_std"]),
        eigenvalues=np.array(d["eigenvalues"]),
        mean=np.array(d["mean"]),
        columns=tuple(d["columns"]),
        seed=int(d["seed"]),
    )
    betas = BetaSet(
        assets=tuple(d["assets"]),
        linear=np.array(d["linear"]).reshape(-1, 3),
        poly=np.array(d["poly"]).reshape(-1, 9),
        caps=np.array(d["caps"]),
        intercept_linear=np.array(d["intercept_linear"]),
        intercept_poly=np.array(d["intercept_poly"]),
        ridge_fallback=tuple(d["ridge_fallback"]),
    )
    return factors, betas
