"""
SVG figures rendered strictly from emitted CSVs.

Output bytes depend only on the CSV contents: the SVG hash salt is fixed
and no date metadata is written.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pandas as pd
from matplotlib.figure import Figure

logger = logging.getLogger(__name__)

FIGURE_DIR = "report/figures"
SVG_HASHSALT = "stresslab"
SHOCK_LABELS = {"d_gdp": "GDP growth shock (pp)", "d_inflation": "Inflation shock (pp)", "d_rate": "Policy rate shock (pp)"}

matplotlib.rcParams.update({
    "svg.hashsalt": SVG_HASHSALT,
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
})


@dataclass(frozen=True, slots=True)
class FigureSpec:
    name: str
    source: str
    title: str
    draw: Callable[[Figure, pd.DataFrame], None]

    @property
    def path(self) -> str:
        return f"{FIGURE_DIR}/{self.name}.svg"


def _no_data(fig: Figure, message: str = "no rows") -> None:
    ax = fig.add_subplot(1, 1, 1)
    ax.text(0.5, 0.5, message, ha="center", va="center", transform=ax.transAxes)
    ax.set_axis_off()


def _groups(frame: pd.DataFrame, key: str, value: str) -> tuple[list[str], list[np.ndarray]]:
    labels, data = [], []
    for label, group in frame.groupby(key, sort=True):
        values = group[value].dropna().to_numpy(dtype=float)
        if values.size:
            labels.append(str(label))
            data.append(values)
    return labels, data


def draw_baselines(fig: Figure, table: pd.DataFrame) -> None:
    """Grouped bars: VaR and CVaR per method, one panel per portfolio."""
    table = table[table["baseline_id"] == table["baseline_id"].iloc[0]] if not table.empty else table
    portfolios = sorted(table["portfolio_id"].unique())
    if not portfolios:
        return _no_data(fig)
    for i, pid in enumerate(portfolios, start=1):
        ax = fig.add_subplot(1, len(portfolios), i)
        rows = table[table["portfolio_id"] == pid].sort_values("method", kind="mergesort")
        x = np.arange(len(rows))
        ax.bar(x - 0.2, rows["var95"], width=0.4, label="VaR 95%")
        ax.bar(x + 0.2, rows["cvar95"], width=0.4, label="CVaR 95%")
        ax.set_xticks(x, rows["method"].tolist())
        ax.set_title(f"Portfolio {pid}")
        ax.set_ylabel("63-day loss")
        ax.legend(loc="upper left")


def draw_macro_violins(fig: Figure, audit: pd.DataFrame) -> None:
    accepted = audit[audit["accepted"] == 1]
    if accepted.empty:
        return _no_data(fig, "no accepted scenarios")
    for i, col in enumerate(SHOCK_LABELS, start=1):
        ax = fig.add_subplot(1, len(SHOCK_LABELS), i)
        labels, data = _groups(accepted, "country", col)
        if not data:
            continue
        ax.violinplot(data, showmedians=True)
        ax.set_xticks(np.arange(1, len(labels) + 1), labels, rotation=45)
        ax.set_title(SHOCK_LABELS[col])


def draw_cvar_boxplots(fig: Figure, risk: pd.DataFrame) -> None:
    linear = risk[risk["channel"] == "linear"]
    portfolios = sorted(linear["portfolio_id"].unique())
    if not portfolios:
        return _no_data(fig)
    for i, pid in enumerate(portfolios, start=1):
        ax = fig.add_subplot(len(portfolios), 1, i)
        labels, data = _groups(linear[linear["portfolio_id"] == pid], "country", "cvar_mult")
        ax.boxplot(data, tick_labels=labels)
        ax.axhline(1.0, color="grey", linewidth=0.8, linestyle="--")
        ax.set_ylabel("CVaR multiple")
        ax.set_title(f"Linear channel, portfolio {pid}")


def draw_inflation_scatter(fig: Figure, risk: pd.DataFrame) -> None:
    channels = [c for c in ("vol", "linear", "nonlinear") if c in set(risk["channel"])]
    if not channels:
        return _no_data(fig)
    for i, channel in enumerate(channels, start=1):
        ax = fig.add_subplot(1, len(channels), i)
        rows = risk[risk["channel"] == channel]
        for pid, group in rows.groupby("portfolio_id", sort=True):
            ax.scatter(group["d_inflation"], group["cvar95"], s=10, alpha=0.7, label=f"Portfolio {pid}")
        ax.set_xlabel("Inflation shock (pp)")
        ax.set_ylabel("CVaR 95%")
        ax.set_title(channel)
        ax.legend(loc="upper left")


def draw_news_effect(fig: Figure, risk: pd.DataFrame) -> None:
    subset = risk[(risk["channel"] == "linear") & risk["rag"].astype(bool)]
    portfolios = sorted(subset["portfolio_id"].unique())
    if not portfolios:
        return _no_data(fig, "no retrieval-on rows")
    for i, pid in enumerate(portfolios, start=1):
        ax = fig.add_subplot(1, len(portfolios), i)
        rows = subset[subset["portfolio_id"] == pid]
        data = [rows.loc[rows["use_news"].astype(bool) == flag, "cvar_mult"].to_numpy(dtype=float) for flag in (False, True)]
        ax.boxplot(data, tick_labels=["news off", "news on"])
        ax.set_ylabel("CVaR multiple")
        ax.set_title(f"Portfolio {pid}")


def draw_heatmap(fig: Figure, means: pd.DataFrame) -> None:
    config_cols = [c for c in means.columns if c not in ("portfolio_id", "country")]
    portfolios = sorted(means["portfolio_id"].unique()) if "portfolio_id" in means else []
    if not portfolios or not config_cols:
        return _no_data(fig)
    for i, pid in enumerate(portfolios, start=1):
        ax = fig.add_subplot(1, len(portfolios), i)
        rows = means[means["portfolio_id"] == pid].sort_values("country", kind="mergesort")
        grid = rows[config_cols].to_numpy(dtype=float)
        image = ax.imshow(grid, aspect="auto", cmap="viridis")
        ax.set_yticks(np.arange(len(rows)), rows["country"].tolist())
        ax.set_xticks(np.arange(len(config_cols)), config_cols, rotation=45, ha="right")
        ax.set_title(f"Mean VaR multiple, portfolio {pid}")
        fig.colorbar(image, ax=ax)


FIGURES = (
    FigureSpec("baselines", "baselines/baselines.csv", "Historical baselines", draw_baselines),
    FigureSpec("macro_violins", "audit/audit.csv", "Macro shock distributions by country", draw_macro_violins),
    FigureSpec("cvar_boxplots", "simulate/risk_report.csv", "Linear CVaR multiples by country", draw_cvar_boxplots),
    FigureSpec("inflation_cvar", "simulate/risk_report.csv", "Inflation shock vs CVaR", draw_inflation_scatter),
    FigureSpec("news_effect", "simulate/risk_report.csv", "News on vs off", draw_news_effect),
    FigureSpec("country_config_heatmap", "diagnostics/country_config_means.csv", "Country x configuration",
               draw_heatmap),
)


def render_figure(spec: FigureSpec, source: Path, out_path: Path) -> Path:
    frame = pd.read_csv(source)
    fig = Figure(figsize=(11, 5), layout="constrained")
    spec.draw(fig, frame)
    fig.suptitle(spec.title)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    return out_path


def render_figures(out_dir: str | Path) -> tuple[list[FigureSpec], list[str]]:
    """Render every figure whose CSV exists; returns (rendered, missing CSV keys)."""
    out_dir = Path(out_dir)
    rendered: list[FigureSpec] = []
    missing: list[str] = []
    for spec in FIGURES:
        source = out_dir / spec.source
        if not source.exists():
            logger.error(f"stage=report event=source_missing figure={spec.name} csv={spec.source}")
            if spec.source not in missing:
                missing.append(spec.source)
            continue
        render_figure(spec, source, out_dir / spec.path)
        rendered.append(spec)
        logger.info(f"stage=report event=figure_rendered figure={spec.name} csv={spec.source}")
    return rendered, missing
