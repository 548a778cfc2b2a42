"""
Fairness and robustness cards on aggregated cells
(country x prompt_variant x rag x use_news) per portfolio.

A cell's outcome is the mean multiple over its accepted scenarios; cells
without scenarios stay in the grid with no outcome. A news flip is a
(country, variant, rag) pair whose news-on minus news-off delta changes
sign when either side moves by +-1%.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

Z_CUTOFF = 3.0
MAD_CUTOFF = 3.5
MAD_CONSISTENCY = 0.6745
PERTURBATION = 0.01
CELL_KEYS = ["country", "prompt_variant", "rag", "use_news"]


@dataclass(frozen=True, slots=True)
class FairnessCard:
    portfolio: str
    cells_total: int
    rows_with_outcome: int
    flips: int
    outliers_z: int
    outliers_mad: int
    gap_var_linear: float
    gap_var_nonlinear: float


def cell_grid(
    risk: pd.DataFrame,
    portfolio: str,
    channel: str,
    countries: Sequence[str],
    variants: Sequence[str],
    configs: Sequence[tuple[bool, bool]],
    metric: str = "var_mult",
) -> pd.DataFrame:
    """Full factorial cell table with a NaN outcome where no scenario landed."""
    index = pd.MultiIndex.from_tuples(
        [(c, v, bool(r), bool(n)) for c, v, (r, n) in itertools.product(countries, variants, configs)],
        names=CELL_KEYS,
    )
    subset = risk[(risk["portfolio_id"] == portfolio) & (risk["channel"] == channel)]
    if subset.empty:
        means = pd.Series(np.nan, index=index)
    else:
        subset = subset.astype({"rag": bool, "use_news": bool})
        means = subset.groupby(CELL_KEYS)[metric].mean().reindex(index)
    return means.rename("outcome").reset_index()


def z_outliers(values: np.ndarray, cutoff: float = Z_CUTOFF) -> int:
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return 0
    sd = x.std(ddof=1)
    if sd == 0:
        return 0
    return int((np.abs((x - x.mean()) / sd) > cutoff).sum())


def mad_outliers(values: np.ndarray, cutoff: float = MAD_CUTOFF) -> int:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return 0
    med = np.median(x)
    dev = np.abs(x - med)
    mad = np.median(dev)
    if mad == 0:
        return int((dev > 0).sum())
    return int((MAD_CONSISTENCY * dev / mad > cutoff).sum())


def news_flips(cells: pd.DataFrame, perturbation: float = PERTURBATION) -> int:
    wide = cells.pivot_table(index=["country", "prompt_variant", "rag"], columns="use_news",
                             values="outcome", dropna=False)
    wide.columns = ["news_on" if flag else "news_off" for flag in wide.columns]
    if "news_on" not in wide.columns or "news_off" not in wide.columns:
        return 0
    pairs = wide[["news_on", "news_off"]].dropna()
    on, off = pairs["news_on"].to_numpy(), pairs["news_off"].to_numpy()
    base = np.sign(on - off)
    up = np.sign(on * (1 + perturbation) - off * (1 - perturbation))
    down = np.sign(on * (1 - perturbation) - off * (1 + perturbation))
    return int(((up != base) | (down != base)).sum())


def country_gap(cells: pd.DataFrame) -> float:
    means = cells.dropna(subset=["outcome"]).groupby("country")["outcome"].mean()
    if means.empty:
        return 0.0
    return float(means.max() - means.min())


def fairness_card(
    risk: pd.DataFrame,
    portfolio: str,
    countries: Sequence[str],
    variants: Sequence[str],
    configs: Sequence[tuple[bool, bool]],
    metric: str = "var_mult",
) -> FairnessCard:
    linear = cell_grid(risk, portfolio, "linear", countries, variants, configs, metric)
    nonlinear = cell_grid(risk, portfolio, "nonlinear", countries, variants, configs, metric)
    outcome = linear["outcome"].dropna().to_numpy()
    card = FairnessCard(
        portfolio=portfolio,
        cells_total=len(linear),
        rows_with_outcome=int(outcome.size),
        flips=news_flips(linear),
        outliers_z=z_outliers(outcome),
        outliers_mad=mad_outliers(outcome),
        gap_var_linear=country_gap(linear),
        gap_var_nonlinear=country_gap(nonlinear),
    )
    logger.info(
        f"stage=diagnostics event=fairness_card portfolio={portfolio} cells={card.cells_total} "
        f"with_outcome={card.rows_with_outcome} flips={card.flips}"
    )
    return card


def fairness_table(cards: Sequence[FairnessCard]) -> pd.DataFrame:
    return pd.DataFrame([asdict(c) for c in cards], columns=list(FairnessCard.__dataclass_fields__))
