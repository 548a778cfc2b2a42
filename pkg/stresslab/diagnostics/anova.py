"""
Main-effects ANOVA (Type II sums of squares) with partial eta squared.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import pandas as pd
import statsmodels.formula.api as smf
from statsmodels.stats.anova import anova_lm

from stresslab.core.errors import DesignMatrixError, InsufficientDataError

logger = logging.getLogger(__name__)

ANOVA_FACTORS = ("portfolio_id", "country", "prompt_variant", "rag", "use_news")
ANOVA_COLUMNS = ["metric", "effect", "df", "sum_sq", "F", "p_value", "partial_eta2"]


@dataclass(frozen=True, slots=True)
class AnovaRow:
    metric: str
    effect: str
    df: float
    sum_sq: float
    F: float
    p_value: float
    partial_eta2: float


def _rhs(factors: Sequence[str]) -> str:
    return " + ".join(f"C({f})" for f in factors)


def _design(frame: pd.DataFrame, factors: Sequence[str]) -> np.ndarray:
    rhs = _rhs(factors) if factors else "1"
    return smf.ols(f"y ~ {rhs}", data=frame).exog


def _aliased(frame: pd.DataFrame, factors: Sequence[str]) -> list[str]:
    """Factors whose columns add less rank than their degrees of freedom."""
    full = _design(frame, factors)
    rank_full = np.linalg.matrix_rank(full)
    if rank_full == full.shape[1]:
        return []
    aliased = []
    for f in factors:
        rest = [g for g in factors if g != f]
        gained = rank_full - np.linalg.matrix_rank(_design(frame, rest))
        if gained < frame[f].nunique() - 1:
            aliased.append(f)
    return aliased or list(factors)


def anova_eta2(table: pd.DataFrame, metric: str, factors: Sequence[str] = ANOVA_FACTORS) -> list[AnovaRow]:
    """
    Factors with a single observed level are dropped (logged). A design whose
    factors are not jointly identifiable raises DesignMatrixError.
    """
    frame = table[[metric, *factors]].dropna().rename(columns={metric: "y"})
    frame = frame.astype({f: str for f in factors})
    used = []
    for f in factors:
        if frame[f].nunique() < 2:
            logger.info(f"stage=diagnostics event=anova_factor_dropped factor={f} reason=single_level")
        else:
            used.append(f)
    if not used:
        raise InsufficientDataError(f"no factor with two or more levels for {metric}")

    aliased = _aliased(frame, used)
    if aliased:
        raise DesignMatrixError(aliased)

    fit = smf.ols(f"y ~ {_rhs(used)}", data=frame).fit()
    result = anova_lm(fit, typ=2)
    ss_resid = float(result.loc["Residual", "sum_sq"])
    rows = []
    for f in used:
        term = f"C({f})"
        ss = float(result.loc[term, "sum_sq"])
        df = float(result.loc[term, "df"])
        denom = ss + ss_resid
        eta = ss / denom if denom > 0 else 0.0
        if ss_resid > 0:
            f_stat, p = float(result.loc[term, "F"]), float(result.loc[term, "PR(>F)"])
        else:
            f_stat, p = (np.inf, 0.0) if ss > 0 else (np.nan, 1.0)
        rows.append(AnovaRow(metric, f, df, ss, f_stat, min(1.0, max(0.0, p)), min(1.0, max(0.0, eta))))
    return rows


def anova_table(risk: pd.DataFrame, metrics: Sequence[str] = ("var_mult", "cvar_mult"),
                channel: str = "linear", factors: Sequence[str] = ANOVA_FACTORS) -> pd.DataFrame:
    subset = risk[risk["channel"] == channel]
    rows = []
    for metric in metrics:
        rows.extend(anova_eta2(subset, metric, factors))
    return pd.DataFrame([asdict(r) for r in rows], columns=ANOVA_COLUMNS)
