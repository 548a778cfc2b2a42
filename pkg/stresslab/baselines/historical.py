"""
LLM-free historical baselines: daily portfolio series and the overlapping
63-day block bootstrap.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from stresslab.core.errors import InsufficientDataError, MissingArtifactError
from stresslab.risk.simulation import Portfolio, TailMetrics, path_drawdowns, var_cvar

logger = logging.getLogger(__name__)

BASELINE_COLUMNS = ["baseline_id", "portfolio_id", "method", "var95", "cvar95", "mdd", "window_start", "window_end", "params_json"]

UNCONDITIONAL_ID = "unconditional_2000_2025"
CALM_ID = "calm_2012_2019"
# baseline id -> key into RunConfig.windows
BASELINE_WINDOWS = {UNCONDITIONAL_ID: "unconditional", CALM_ID: "calm"}


@dataclass(frozen=True)
class BaselineResult:
    method: str
    var95: float
    cvar95: float
    window: tuple[str, str]
    params: Mapping[str, Any] = field(default_factory=dict)
    mdd: float | None = None
    portfolio_id: str = ""
    baseline_id: str = ""

    def as_tail(self) -> TailMetrics:
        return TailMetrics(self.var95, self.cvar95, self.mdd or 0.0, channel=self.method)

    def to_row(self) -> dict:
        return {
            "baseline_id": self.baseline_id,
            "portfolio_id": self.portfolio_id,
            "method": self.method,
            "var95": self.var95,
            "cvar95": self.cvar95,
            "mdd": self.mdd,
            "window_start": self.window[0],
            "window_end": self.window[1],
            "params_json": json.dumps(dict(self.params), sort_keys=True),
        }


def portfolio_returns(log_rets: pd.DataFrame, portfolio: Portfolio, window: tuple[str, str] | None = None) -> pd.Series:
    """
    Daily simple returns of a fixed-weight portfolio rebalanced each day.
    Dates where any holding lacks a return are dropped.
    """
    tickers = list(portfolio.weights)
    missing = [t for t in tickers if t not in log_rets.columns]
    if missing:
        raise MissingArtifactError(f"prices:{','.join(missing)}")
    frame = log_rets[tickers]
    if window is not None:
        frame = frame.loc[pd.Timestamp(window[0]):pd.Timestamp(window[1])]
    frame = frame.dropna(how="any")
    weights = np.array([portfolio.weights[t] for t in tickers])
    simple = np.expm1(frame.to_numpy(dtype=float))
    return pd.Series(simple @ weights, index=frame.index, name=portfolio.id)


def block_paths(returns: np.ndarray, horizon: int) -> np.ndarray:
    """Every overlapping horizon-day block as rows (read-only view)."""
    r = np.asarray(returns, dtype=float)
    if r.size < horizon + 1:
        raise InsufficientDataError(f"series of length {r.size} is too short for {horizon}-day blocks")
    return sliding_window_view(r, horizon)


def block_losses(returns: np.ndarray, horizon: int = 63) -> np.ndarray:
    return -(np.prod(1.0 + block_paths(returns, horizon), axis=1) - 1.0)


def bootstrap_var(
    returns: np.ndarray,
    horizon: int = 63,
    n_resamples: int = 50000,
    seed: int = 0,
    window: tuple[str, str] = ("", ""),
) -> BaselineResult:
    """Uniformly drawn start indices over all overlapping blocks; empirical VaR/CVaR of the compounded losses."""
    blocks = block_paths(returns, horizon)
    losses = -(np.prod(1.0 + blocks, axis=1) - 1.0)
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, losses.size, size=n_resamples)
    var, cvar = var_cvar(losses[starts])
    mdd = float(min(0.0, path_drawdowns(blocks[starts]).mean()))
    return BaselineResult(
        method="bootstrap",
        var95=var,
        cvar95=cvar,
        window=window,
        params={"horizon": horizon, "n_resamples": n_resamples, "seed": seed, "blocks": int(losses.size)},
        mdd=mdd,
    )


def historical_baselines(
    log_rets: pd.DataFrame,
    portfolios: Sequence[Portfolio],
    windows: Mapping[str, tuple[str, str]],
    horizon: int,
    n_resamples: int,
    seed: int,
    run_id: str = "",
) -> dict[str, dict[str, BaselineResult]]:
    """{baseline_id: {portfolio_id: bootstrap result}} for the unconditional and calm windows."""
    out: dict[str, dict[str, BaselineResult]] = {}
    for baseline_id, window_key in BASELINE_WINDOWS.items():
        window = tuple(windows[window_key])
        out[baseline_id] = {}
        for p in portfolios:
            series = portfolio_returns(log_rets, p, window)
            result = bootstrap_var(series.to_numpy(), horizon, n_resamples, seed, window)
            out[baseline_id][p.id] = BaselineResult(
                result.method, result.var95, result.cvar95, result.window, result.params,
                result.mdd, p.id, baseline_id,
            )
            logger.info(
                f"run_id={run_id} stage=baselines event=bootstrap_done baseline={baseline_id} "
                f"portfolio={p.id} var95={result.var95:.4f} cvar95={result.cvar95:.4f}"
            )
    return out


def baseline_table(results: Sequence[BaselineResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in results], columns=BASELINE_COLUMNS)


def load_baseline_results(path: str | Path, method: str = "bootstrap") -> dict[str, dict[str, BaselineResult]]:
    """{baseline_id: {portfolio_id: result}} for one method, read back from baselines.csv."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("baselines.csv", path)
    table = pd.read_csv(path)
    out: dict[str, dict[str, BaselineResult]] = {}
    for r in table[table["method"] == method].itertuples(index=False):
        out.setdefault(str(r.baseline_id), {})[str(r.portfolio_id)] = BaselineResult(
            method=method,
            var95=float(r.var95),
            cvar95=float(r.cvar95),
            window=(str(r.window_start), str(r.window_end)),
            params=json.loads(r.params_json),
            mdd=None if pd.isna(r.mdd) else float(r.mdd),
            portfolio_id=str(r.portfolio_id),
            baseline_id=str(r.baseline_id),
        )
    return out


def load_baseline_metrics(path: str | Path, baseline_id: str) -> dict[str, TailMetrics]:
    """Bootstrap metrics per portfolio for one baseline id from baselines.csv."""
    per_portfolio = load_baseline_results(path).get(baseline_id)
    if not per_portfolio:
        raise MissingArtifactError(f"baselines.csv:{baseline_id}", path)
    return {pid: r.as_tail() for pid, r in per_portfolio.items()}
