"""
Cached daily ETF prices: loading, return derivation and history screening.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from stresslab.core.errors import DuplicateKeyError, IngestError, InsufficientDataError

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["date", "ticker", "adj_close"]


@dataclass(frozen=True)
class PricePanel:
    """dates x tickers adjusted closes; NaN only outside a ticker's active range."""

    frame: pd.DataFrame

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def tickers(self) -> list[str]:
        return list(self.frame.columns)

    @property
    def adj_close(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=float)

    def window(self, start: str, end: str) -> "PricePanel":
        return PricePanel(self.frame.loc[pd.Timestamp(start):pd.Timestamp(end)])


def _active_range_gaps(frame: pd.DataFrame) -> dict[str, int]:
    gaps = {}
    for ticker in frame.columns:
        col = frame[ticker]
        valid = col.notna().to_numpy()
        if not valid.any():
            gaps[ticker] = -1
            continue
        first = int(np.argmax(valid))
        last = len(valid) - 1 - int(np.argmax(valid[::-1]))
        holes = int((~valid[first:last + 1]).sum())
        if holes:
            gaps[ticker] = holes
    return gaps


def load_prices(path: str | Path) -> PricePanel:
    """
    Load a `date,ticker,adj_close` CSV into a date-sorted panel.

    Row order in the file does not matter. Gaps inside a ticker's range are
    rejected rather than filled.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"price file not found: {path}")

    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(raw.columns) != PRICE_COLUMNS:
        raise IngestError(f"{path}: expected header {','.join(PRICE_COLUMNS)}, got {','.join(raw.columns)}")

    # line 1 is the header
    dates = pd.to_datetime(raw["date"], format="%Y-%m-%d", errors="coerce")
    closes = pd.to_numeric(raw["adj_close"], errors="coerce")
    bad = dates.isna() | closes.isna() | (raw["ticker"].str.strip() == "")
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise IngestError(f"{path}: unparseable row at line {line}")
    if not np.isfinite(closes.to_numpy()).all() or (closes <= 0).any():
        line = int(np.flatnonzero(~(closes > 0).to_numpy() | ~np.isfinite(closes.to_numpy()))[0]) + 2
        raise IngestError(f"{path}: nonpositive price at line {line}")

    tidy = pd.DataFrame({"date": dates, "ticker": raw["ticker"].str.strip(), "adj_close": closes})
    dup = tidy.duplicated(subset=["date", "ticker"], keep="first")
    if dup.any():
        row = tidy[dup].iloc[0]
        line = int(np.flatnonzero(dup.to_numpy())[0]) + 2
        raise DuplicateKeyError(
            f"{path}: duplicate (date,ticker)=({row['date'].date()},{row['ticker']}) at line {line}"
        )

    frame = tidy.pivot(index="date", columns="ticker", values="adj_close").sort_index()
    frame = frame.reindex(sorted(frame.columns), axis=1)
    frame.columns.name = None

    gaps = _active_range_gaps(frame)
    if gaps:
        raise IngestError(f"{path}: missing prices inside active range: {gaps}")

    logger.info(
        f"stage=ingest event=prices_loaded file={path.name} "
        f"dates={len(frame)} tickers={len(frame.columns)}"
    )
    return PricePanel(frame)


def log_returns(p: PricePanel) -> pd.DataFrame:
    """r[t,i] = ln(P[t+1,i] / P[t,i]); NaN where either price is outside the active range."""
    frame = p.frame
    if len(frame) < 2:
        raise InsufficientDataError("log returns need at least 2 dates")
    values = frame.to_numpy(dtype=float)
    finite = values[np.isfinite(values)]
    if (finite <= 0).any():
        raise IngestError("nonpositive price in panel")
    rets = np.log(values[1:] / values[:-1])
    return pd.DataFrame(rets, index=frame.index[1:], columns=frame.columns)


def eligible_tickers(
    panel: PricePanel,
    candidates: Sequence[str],
    min_history_days: int,
    windows: Mapping[str, tuple[str, str]] | None = None,
) -> list[str]:
    """Candidates with enough history that also cover every estimation window."""
    keep = []
    for ticker in candidates:
        if ticker not in panel.frame.columns:
            logger.warning(f"stage=ingest event=ticker_dropped ticker={ticker} reason=absent")
            continue
        col = panel.frame[ticker]
        n_obs = int(col.notna().sum())
        if n_obs < min_history_days:
            logger.warning(
                f"stage=ingest event=ticker_dropped ticker={ticker} "
                f"reason=short_history rows={n_obs} min={min_history_days}"
            )
            continue
        uncovered = []
        for name, (start, end) in (windows or {}).items():
            sub = col.loc[pd.Timestamp(start):pd.Timestamp(end)]
            if sub.empty or sub.isna().any():
                uncovered.append(name)
        if uncovered:
            logger.warning(
                f"stage=ingest event=ticker_dropped ticker={ticker} reason=window_gap windows={uncovered}"
            )
            continue
        keep.append(ticker)
    return keep


def write_prices(path: str | Path, frame: pd.DataFrame) -> None:
    """Inverse of load_prices for a wide frame (NaN cells are skipped)."""
    long = frame.stack(future_stack=True).dropna().rename("adj_close").reset_index()
    long.columns = PRICE_COLUMNS
    long["date"] = long["date"].dt.strftime("%Y-%m-%d")
    long = long.sort_values(["date", "ticker"], kind="mergesort")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    long.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
