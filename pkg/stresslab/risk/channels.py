"""
Three-channel stress simulation per accepted scenario.

vol        zero drift, inflation-scaled lambda-mixed covariance
linear     PCA-beta drift, lambda-mixed covariance
nonlinear  linear drift plus capped polynomial drift amplified by text flags
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from stresslab.audit.plausibility import derive_shock
from stresslab.config.worker_config import resolve_workers
from stresslab.core.errors import MissingArtifactError
from stresslab.core.model import CHANNELS, MacroShock, RunConfig, Scenario
from stresslab.ingest_tools.weo import CountryBaseline
from stresslab.risk.covariance import CovariancePair, mix_covariance, scale_cov_for_vol_channel
from stresslab.risk.factors import BetaSet, PcaFactors, linear_drift, macro_to_factor, nonlinear_drift
from stresslab.risk.simulation import (
    Portfolio,
    TailMetrics,
    multiples,
    simulate_paths,
    stream_key,
    tail_metrics,
)

logger = logging.getLogger(__name__)

RISK_COLUMNS = [
    "scenario_hash", "portfolio_id", "channel", "var95", "cvar95", "mdd", "mdd_q95",
    "var_mult", "cvar_mult", "dvar_pct", "dcvar_pct", "baseline_id", "eps_jitter", "seed",
    "country", "model", "rag", "use_news", "prompt_variant", "lambda", "d_gdp", "d_inflation", "d_rate",
]


@dataclass(frozen=True, slots=True)
class RiskRow:
    scenario_hash: str
    portfolio_id: str
    channel: str
    var95: float
    cvar95: float
    mdd: float
    mdd_q95: float
    var_mult: float
    cvar_mult: float
    dvar_pct: float
    dcvar_pct: float
    baseline_id: str
    eps_jitter: float
    seed: int
    country: str
    model: str
    rag: bool
    use_news: bool
    prompt_variant: str
    lambda_: float
    d_gdp: float
    d_inflation: float
    d_rate: float

    def to_row(self) -> dict:
        row = asdict(self)
        row["lambda"] = row.pop("lambda_")
        return row


def channel_inputs(
    shock: MacroShock,
    lam: float,
    rag: bool,
    use_news: bool,
    factors: PcaFactors,
    betas: BetaSet,
    covpair: CovariancePair,
    cfg: RunConfig,
    channels: Sequence[str] = CHANNELS,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(drift assets x H, covariance) per channel, in covpair asset order."""
    params = cfg.channel_params
    horizon = cfg.horizon_days
    betas = betas.subset(covpair.assets)
    sigma = mix_covariance(covpair, lam)
    delta_f = macro_to_factor(shock)

    mu_lin = cfg.mu_base + linear_drift(betas, delta_f, factors.factor_std, horizon, params.drift_decay)
    out = {}
    for channel in channels:
        if channel == "vol":
            out[channel] = (np.full((len(covpair.assets), horizon), cfg.mu_base), scale_cov_for_vol_channel(sigma, shock, params))
        elif channel == "linear":
            out[channel] = (mu_lin, sigma)
        elif channel == "nonlinear":
            mu_nl = nonlinear_drift(betas, delta_f, lam, rag, use_news, params, factors.factor_std, horizon)
            out[channel] = (mu_lin + mu_nl, sigma)
        else:
            raise ValueError(f"unknown channel '{channel}'")
    return out


def run_channels(
    s: Scenario,
    factors: PcaFactors,
    betas: BetaSet,
    covpair: CovariancePair,
    portfolios: Sequence[Portfolio],
    cfg: RunConfig,
    baseline_metrics: Mapping[str, TailMetrics],
    weo: CountryBaseline,
    channels: Sequence[str] = CHANNELS,
) -> list[RiskRow]:
    """
    Simulate every requested channel for one scenario. The stream key holds
    only the numeric shock, lambda and channel, so text and flags never reach
    the vol and linear channels.
    """
    if s.plausibility_ok != 1:
        raise ValueError(f"scenario {s.scenario_hash[:12]} was not accepted by the audit")
    missing = [p.id for p in portfolios if p.id not in baseline_metrics]
    if missing:
        raise MissingArtifactError(f"baselines:{','.join(missing)}")

    shock = derive_shock(s, weo, cfg.rates_are_levels, cfg.growth_inflation_are_levels)
    lam = s.lambda_
    weights = {p.id: p.vector(covpair.assets) for p in portfolios}
    inputs = channel_inputs(shock, lam, s.rag, s.use_news, factors, betas, covpair, cfg, channels)

    rows = []
    for channel in channels:
        mu, sigma = inputs[channel]
        key = stream_key({"shock": list(shock.as_array()), "lambda": lam, "channel": channel})
        paths, eps = simulate_paths(
            mu, sigma, cfg.n_paths, cfg.horizon_days, cfg.seed, cfg.channel_params.return_clip, weights, key=key
        )
        for p in portfolios:
            m = tail_metrics(paths[p.id], channel)
            mult = multiples(m, baseline_metrics[p.id])
            rows.append(RiskRow(
                scenario_hash=s.scenario_hash,
                portfolio_id=p.id,
                channel=channel,
                var95=m.var95,
                cvar95=m.cvar95,
                mdd=m.mdd,
                mdd_q95=m.mdd_q95,
                var_mult=mult.var_mult,
                cvar_mult=mult.cvar_mult,
                dvar_pct=mult.dvar_pct,
                dcvar_pct=mult.dcvar_pct,
                baseline_id=cfg.baseline_id,
                eps_jitter=eps,
                seed=cfg.seed,
                country=s.country,
                model=s.model,
                rag=s.rag,
                use_news=s.use_news,
                prompt_variant=s.prompt_variant,
                lambda_=lam,
                d_gdp=shock.gdp_growth,
                d_inflation=shock.inflation,
                d_rate=shock.interest_rate,
            ))
    return rows


def run_risk_grid(
    scenarios: Sequence[Scenario],
    factors: PcaFactors,
    betas: BetaSet,
    covpair: CovariancePair,
    portfolios: Sequence[Portfolio],
    cfg: RunConfig,
    baseline_metrics: Mapping[str, TailMetrics],
    weos: Mapping[str, CountryBaseline],
    channels: Sequence[str] = CHANNELS,
    run_id: str = "",
    workers: int | None = None,
) -> pd.DataFrame:
    """Scenario jobs on a thread pool; rows merged in scenario-input order."""
    if not scenarios:
        logger.warning(f"run_id={run_id} stage=simulate event=no_scenarios")
        return pd.DataFrame(columns=RISK_COLUMNS)

    workers = workers or resolve_workers("simulation")
    results: dict[int, list[RiskRow]] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(
                run_channels, s, factors, betas, covpair, portfolios, cfg, baseline_metrics, weos[s.country], channels
            ): i
            for i, s in enumerate(scenarios)
        }
        for future in tqdm(as_completed(futures), total=len(futures), desc="simulate", disable=None):
            i = futures[future]
            results[i] = future.result()

    rows = [row.to_row() for i in sorted(results) for row in results[i]]
    logger.info(
        f"run_id={run_id} stage=simulate event=simulation_completed scenarios={len(scenarios)} "
        f"rows={len(rows)} n_paths={cfg.n_paths} channels={list(channels)}"
    )
    return pd.DataFrame(rows, columns=RISK_COLUMNS)


def write_risk_report(path: str | Path, table: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n")
    return path


def read_risk_report(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("risk_report", path)
    return pd.read_csv(path)
