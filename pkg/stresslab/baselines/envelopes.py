"""
Historical crisis envelopes: episode 63-day losses (GFC, COVID) as multiples
of the unconditional or calm bootstrap baseline.

Two within-episode statistics are emitted. "max_block" (primary) takes the
single worst overlapping block as both VaR and CVaR; "quantile" takes the
95% VaR/CVaR of all blocks inside the episode.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd

from stresslab.baselines.historical import BaselineResult, block_losses, portfolio_returns
from stresslab.core.errors import IngestError, InsufficientDataError, MissingArtifactError, NumericalError
from stresslab.core.model import CRISIS_EPISODES
from stresslab.risk.simulation import Portfolio, var_cvar

logger = logging.getLogger(__name__)

PRIMARY_VARIANT = "max_block"
VARIANTS = ("max_block", "quantile")
ENVELOPE_COLUMNS = ["episode", "baseline_id", "portfolio_id", "variant", "primary", "var95", "cvar95", "var_mult", "cvar_mult"]


@dataclass(frozen=True, slots=True)
class CrisisEnvelope:
    episode: str
    baseline_id: str
    var_mult: float
    cvar_mult: float
    var95: float
    cvar95: float
    variant: str = PRIMARY_VARIANT
    portfolio_id: str = ""

    def to_row(self) -> dict:
        row = asdict(self)
        row["primary"] = int(self.variant == PRIMARY_VARIANT)
        return row


def envelope_from_metrics(
    episode: str,
    var95: float,
    cvar95: float,
    baseline_var: float,
    baseline_cvar: float,
    baseline_id: str,
    variant: str = PRIMARY_VARIANT,
    portfolio_id: str = "",
) -> CrisisEnvelope:
    if baseline_var <= 0 or baseline_cvar <= 0:
        raise NumericalError(f"baseline {baseline_id} has non-positive VaR/CVaR")
    env = CrisisEnvelope(
        episode=episode,
        baseline_id=baseline_id,
        var_mult=var95 / baseline_var,
        cvar_mult=cvar95 / baseline_cvar,
        var95=var95,
        cvar95=cvar95,
        variant=variant,
        portfolio_id=portfolio_id,
    )
    if env.var_mult <= 0 or env.cvar_mult <= 0:
        raise NumericalError(f"episode {episode} has non-positive losses against {baseline_id}")
    return env


def episode_metrics(series: pd.Series, window: tuple[str, str], horizon: int = 63) -> dict[str, tuple[float, float]]:
    """{variant: (var95, cvar95)} over every overlapping block inside the episode window."""
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    if series.empty or start < series.index[0] or end > series.index[-1]:
        raise InsufficientDataError(f"episode window {window} lies outside the price history")
    inside = series.loc[start:end].to_numpy()
    losses = block_losses(inside, horizon)
    worst = float(losses.max())
    return {"max_block": (worst, worst), "quantile": var_cvar(losses)}


def crisis_envelopes(
    log_rets: pd.DataFrame,
    portfolios: Sequence[Portfolio],
    windows: Mapping[str, tuple[str, str]],
    baselines: Mapping[str, Mapping[str, BaselineResult]],
    horizon: int = 63,
    run_id: str = "",
) -> list[CrisisEnvelope]:
    out = []
    for p in portfolios:
        series = portfolio_returns(log_rets, p)
        for episode in CRISIS_EPISODES:
            metrics = episode_metrics(series, tuple(windows[episode]), horizon)
            for baseline_id, per_portfolio in baselines.items():
                base = per_portfolio[p.id]
                for variant in VARIANTS:
                    var, cvar = metrics[variant]
                    out.append(envelope_from_metrics(episode, var, cvar, base.var95, base.cvar95,
                                                     baseline_id, variant, p.id))
            logger.info(
                f"run_id={run_id} stage=envelopes event=episode_done portfolio={p.id} episode={episode} "
                f"worst_block_loss={metrics['max_block'][0]:.4f}"
            )
    return out


def load_episode_metrics(path: str | Path) -> list[CrisisEnvelope]:
    """
    Envelopes from a per-window metrics file:
    {"portfolio": "A", "episodes": {name: {var95, cvar95}}, "baselines": {id: {var95, cvar95}}}
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("episode_metrics", path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise IngestError(f"{path}: invalid JSON ({e})")
    portfolio_id = str(data.get("portfolio", ""))
    out = []
    for episode, m in sorted(data["episodes"].items()):
        for baseline_id, b in sorted(data["baselines"].items()):
            out.append(envelope_from_metrics(
                episode, float(m["var95"]), float(m["cvar95"]), float(b["var95"]), float(b["cvar95"]),
                baseline_id, "reported", portfolio_id,
            ))
    return out


def envelope_table(envelopes: Sequence[CrisisEnvelope]) -> pd.DataFrame:
    return pd.DataFrame([e.to_row() for e in envelopes], columns=ENVELOPE_COLUMNS)
