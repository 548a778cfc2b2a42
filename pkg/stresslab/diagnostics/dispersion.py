"""
Scenario stability: mean pairwise Euclidean distance between macro-shock
vectors, in raw percentage points, with a QC filter on extreme groups.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from stresslab.core.errors import InsufficientDataError
from stresslab.core.model import MacroShock
from stresslab.diagnostics.bootstrap import bootstrap_ci

logger = logging.getLogger(__name__)

SHOCK_COLUMNS = ("d_gdp", "d_inflation", "d_rate")
QC_THRESHOLD = 20.0


@dataclass(frozen=True, slots=True)
class DispersionStat:
    key: tuple
    value: float
    ci_low: float
    ci_high: float
    n: int


def _as_matrix(shocks) -> np.ndarray:
    rows = [s.as_array() if isinstance(s, MacroShock) else np.asarray(s, dtype=float) for s in shocks]
    return np.vstack(rows) if rows else np.zeros((0, 3))


def dispersion(shocks: Sequence[MacroShock] | np.ndarray) -> float:
    x = _as_matrix(shocks)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"dispersion needs at least 2 scenarios, got {x.shape[0]}")
    return float(pdist(x, metric="euclidean").mean())


def dispersion_stat(key: tuple, shocks, n_resamples: int = 10000, seed: int = 0) -> DispersionStat:
    """CI resamples the pairwise distances, so the interval brackets the point value."""
    x = _as_matrix(shocks)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"dispersion for {key} needs at least 2 scenarios, got {x.shape[0]}")
    distances = pdist(x, metric="euclidean")
    if distances.size == 1:
        value = float(distances[0])
        return DispersionStat(key, value, value, value, x.shape[0])
    value, lo, hi = bootstrap_ci(distances, n_resamples=n_resamples, seed=seed)
    return DispersionStat(key, value, lo, hi, x.shape[0])


def qc_filter(stats: Sequence[DispersionStat], threshold: float = QC_THRESHOLD) -> tuple[list[DispersionStat], list[DispersionStat]]:
    """Drops entries strictly above threshold. Returns (kept, removed)."""
    kept, removed = [], []
    for stat in stats:
        if stat.value > threshold:
            removed.append(stat)
            logger.warning(
                f"stage=diagnostics event=qc_removed key={stat.key} dispersion={stat.value:.4f} threshold={threshold}"
            )
        else:
            kept.append(stat)
    return kept, removed


def grouped_dispersion(
    accepted: pd.DataFrame,
    by: Sequence[str],
    n_resamples: int = 10000,
    seed: int = 0,
    threshold: float = QC_THRESHOLD,
) -> tuple[list[DispersionStat], list[DispersionStat]]:
    """One stat per group with >= 2 scenarios, QC-filtered."""
    stats = []
    if accepted.empty:
        return [], []
    for key, group in accepted.groupby(list(by), sort=True):
        if len(group) < 2:
            continue
        key = key if isinstance(key, tuple) else (key,)
        stats.append(dispersion_stat(key, group[list(SHOCK_COLUMNS)].to_numpy(dtype=float), n_resamples, seed))
    return qc_filter(stats, threshold)


def dispersion_by_prompt(accepted: pd.DataFrame, n_resamples: int = 10000, seed: int = 0,
                         threshold: float = QC_THRESHOLD) -> pd.DataFrame:
    """Per-prompt dispersion pooled across countries, summarized by (model, rag, use_news)."""
    by = ["model", "rag", "use_news", "prompt_variant"]
    kept, _ = grouped_dispersion(accepted, by, n_resamples, seed, threshold)
    columns = ["model", "rag", "use_news", "mean_dispersion", "std_dispersion", "min_dispersion",
               "max_dispersion", "n_prompts"]
    if not kept:
        return pd.DataFrame(columns=columns)
    per_prompt = pd.DataFrame([(*s.key, s.value) for s in kept], columns=[*by, "dispersion"])
    table = (
        per_prompt.groupby(["model", "rag", "use_news"], sort=True)["dispersion"]
        .agg(mean_dispersion="mean", std_dispersion="std", min_dispersion="min", max_dispersion="max",
             n_prompts="count")
        .reset_index()
    )
    return table[columns]


def stability_by_country_config(accepted: pd.DataFrame, n_resamples: int = 10000, seed: int = 0,
                                threshold: float = QC_THRESHOLD) -> pd.DataFrame:
    by = ["model", "country", "rag", "use_news"]
    kept, _ = grouped_dispersion(accepted, by, n_resamples, seed, threshold)
    columns = [*by, "dispersion", "ci_low", "ci_high", "n_scenarios"]
    return pd.DataFrame([(*s.key, s.value, s.ci_low, s.ci_high, s.n) for s in kept], columns=columns)
