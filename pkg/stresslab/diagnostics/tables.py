"""
Result tables built from the audit table and the risk report.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import pandas as pd

from stresslab.core.model import CHANNELS
from stresslab.diagnostics.bootstrap import bootstrap_ci

logger = logging.getLogger(__name__)

CONFIG_KEYS = ["model", "rag", "use_news"]
SHOCKS = ["d_gdp", "d_inflation", "d_rate"]


def config_label(rag: bool, use_news: bool) -> str:
    return f"rag={'on' if rag else 'off'},news={'on' if use_news else 'off'}"


def macro_summary(accepted: pd.DataFrame) -> pd.DataFrame:
    columns = ["country", "n"] + [f"{s}_{stat}" for s in SHOCKS for stat in ("mean", "std", "min", "max")]
    if accepted.empty:
        return pd.DataFrame(columns=columns)
    grouped = accepted.groupby("country", sort=True)
    table = grouped[SHOCKS].agg(["mean", "std", "min", "max"])
    table.columns = [f"{s}_{stat}" for s, stat in table.columns]
    table.insert(0, "n", grouped.size())
    return table.reset_index()[columns]


def severity_by_model(audit: pd.DataFrame) -> pd.DataFrame:
    columns = [*CONFIG_KEYS, "attempted", "accepted", "acceptance_rate", "soft_score_mean",
               "regime_score_mean", "lambda_mean"]
    if audit.empty:
        return pd.DataFrame(columns=columns)
    grouped = audit.groupby(CONFIG_KEYS, sort=True)
    table = pd.DataFrame({
        "attempted": grouped.size(),
        "accepted": grouped["accepted"].sum(),
        "soft_score_mean": grouped["soft_score"].mean(),
        "regime_score_mean": grouped["regime_score"].mean(),
        "lambda_mean": grouped["lambda"].mean(),
    })
    table["acceptance_rate"] = table["accepted"] / table["attempted"]
    return table.reset_index()[columns]


def risk_crossrun(risk: pd.DataFrame, channels: Sequence[str] = CHANNELS) -> pd.DataFrame:
    """Mean/std of VaR and CVaR multiples per channel, by portfolio and configuration."""
    keys = ["portfolio_id", *CONFIG_KEYS]
    value_cols = [f"{m}_{ch}_{stat}" for ch in channels for m in ("var_mult", "cvar_mult") for stat in ("mean", "std")]
    if risk.empty:
        return pd.DataFrame(columns=[*keys, "n", *value_cols])
    wide = risk.pivot_table(index=[*keys, "scenario_hash"], columns="channel",
                            values=["var_mult", "cvar_mult"], aggfunc="first")
    wide.columns = [f"{m}_{ch}" for m, ch in wide.columns]
    wide = wide.reset_index()
    grouped = wide.groupby(keys, sort=True)
    table = pd.DataFrame({"n": grouped["scenario_hash"].nunique()})
    for ch in channels:
        for m in ("var_mult", "cvar_mult"):
            col = f"{m}_{ch}"
            if col in wide.columns:
                table[f"{col}_mean"] = grouped[col].mean()
                table[f"{col}_std"] = grouped[col].std()
            else:
                table[f"{col}_mean"] = float("nan")
                table[f"{col}_std"] = float("nan")
    return table.reset_index()[[*keys, "n", *value_cols]]


def boot_cis(risk: pd.DataFrame, n_resamples: int = 10000, seed: int = 0) -> pd.DataFrame:
    keys = ["portfolio_id", *CONFIG_KEYS]
    columns = [*keys, "n", "var_mult_mean", "var_mult_lo", "var_mult_hi", "cvar_mult_mean", "cvar_mult_lo",
               "cvar_mult_hi"]
    linear = risk[risk["channel"] == "linear"]
    rows = []
    for key, group in linear.groupby(keys, sort=True):
        if len(group) < 2:
            continue
        row = dict(zip(keys, key))
        row["n"] = len(group)
        for m in ("var_mult", "cvar_mult"):
            row[f"{m}_mean"], row[f"{m}_lo"], row[f"{m}_hi"] = bootstrap_ci(group[m].to_numpy(), n_resamples, seed=seed)
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def top_scenarios(risk: pd.DataFrame, n: int = 10) -> pd.DataFrame:
    """Most severe scenarios by linear CVaR multiple (ties broken by hash)."""
    columns = ["scenario_hash", "portfolio_id", "country", "model", "rag", "use_news", "prompt_variant",
               "d_gdp", "d_inflation", "d_rate", "lambda", "var_mult", "cvar_mult"]
    linear = risk[risk["channel"] == "linear"]
    ordered = linear.sort_values(["cvar_mult", "scenario_hash", "portfolio_id"], ascending=[False, True, True],
                                 kind="mergesort")
    return ordered.head(n)[columns].reset_index(drop=True)


def country_config_means(risk: pd.DataFrame) -> pd.DataFrame:
    """Mean linear VaR multiple, country x configuration."""
    linear = risk[risk["channel"] == "linear"].copy()
    if linear.empty:
        return pd.DataFrame(columns=["portfolio_id", "country"])
    linear["config"] = [config_label(r, n) for r, n in zip(linear["rag"], linear["use_news"])]
    table = linear.pivot_table(index=["portfolio_id", "country"], columns="config", values="var_mult", aggfunc="mean")
    table.columns.name = None
    return table.reset_index()


def news_effect(risk: pd.DataFrame) -> pd.DataFrame:
    """News-on vs news-off linear CVaR multiple with retrieval on."""
    columns = ["portfolio_id", "model", "news_off_mean", "news_off_std", "news_off_n", "news_on_mean",
               "news_on_std", "news_on_n", "delta_mean"]
    subset = risk[(risk["channel"] == "linear") & (risk["rag"].astype(bool))]
    rows = []
    for (pid, model), group in subset.groupby(["portfolio_id", "model"], sort=True):
        row = {"portfolio_id": pid, "model": model}
        for label, flag in (("news_off", False), ("news_on", True)):
            values = group.loc[group["use_news"].astype(bool) == flag, "cvar_mult"]
            row[f"{label}_mean"] = values.mean()
            row[f"{label}_std"] = values.std()
            row[f"{label}_n"] = int(values.size)
        row["delta_mean"] = row["news_on_mean"] - row["news_off_mean"]
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def pool_runs(risk: pd.DataFrame, run_dirs: Sequence[str | Path], filename: str = "risk_report.csv") -> pd.DataFrame:
    """Append risk reports from other run directories; the model column keeps them apart."""
    frames = [risk]
    for run_dir in run_dirs:
        path = Path(run_dir) / filename
        if not path.exists():
            logger.warning(f"stage=diagnostics event=compare_run_missing path={path}")
            continue
        frames.append(pd.read_csv(path))
        logger.info(f"stage=diagnostics event=compare_run_pooled path={path} rows={len(frames[-1])}")
    return pd.concat(frames, ignore_index=True) if len(frames) > 1 else risk
