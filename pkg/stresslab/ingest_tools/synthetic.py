"""
Deterministic synthetic inputs for offline runs and tests.

Prices follow a three-factor (equity, rates, gold) model with calm and crisis
regimes; headline pools differ in size per country so snapshots exercise
truncation, dedup and padding.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from stresslab.ingest_tools.headlines import build_headline_snapshot, save_headline_snapshot
from stresslab.ingest_tools.prices import write_prices

logger = logging.getLogger(__name__)

ANCHORS = ("SPY", "IEF", "GLD")
SECTOR_ETFS = ("XLB", "XLE", "XLF", "XLI", "XLK", "XLP", "XLU", "XLV", "XLY", "XLRE")

# inception dates for ETFs younger than the sample
INCEPTION = {"XLRE": "2015-10-08"}

CRISIS_REGIMES = (
    ("2008-09-01", "2009-03-31"),
    ("2020-02-20", "2020-04-30"),
)

# (equity beta, rates beta, idiosyncratic daily vol)
_SECTOR_LOADINGS = {
    "XLB": (1.05, 0.0, 0.009),
    "XLE": (1.10, 0.1, 0.014),
    "XLF": (1.30, 0.2, 0.011),
    "XLI": (1.05, 0.0, 0.007),
    "XLK": (1.15, -0.1, 0.009),
    "XLP": (0.60, -0.1, 0.006),
    "XLU": (0.55, -0.3, 0.008),
    "XLV": (0.75, 0.0, 0.007),
    "XLY": (1.10, 0.0, 0.008),
    "XLRE": (0.90, -0.4, 0.010),
}

_HEADLINE_POOL_SIZES = {
    "Canada": 120,
    "France": 64,
    "Germany": 50,
    "Italy": 12,
    "Japan": 37,
    "United Kingdom": 80,
    "United States": 0,
}

_TOPICS = (
    "central bank", "bond yields", "housing market", "manufacturing output", "energy prices",
    "bank lending", "consumer spending", "export orders", "labour market", "equity markets",
    "currency", "public debt", "inflation expectations", "credit spreads", "trade talks",
)
_MOVES = ("rise", "fall", "stall", "rebound", "slump", "surge", "ease", "tighten")
_QUALIFIERS = (
    "as investors weigh outlook", "amid global uncertainty", "after surprise data",
    "on tariff concerns", "ahead of policy meeting", "as contagion fears spread",
    "despite government support", "in volatile trading",
)


def business_days(start="2000-01-03", end="2025-09-30") -> pd.DatetimeIndex:
    return pd.bdate_range(start, end)


def synthetic_prices(seed: int = 7, start="2000-01-03", end="2025-09-30") -> pd.DataFrame:
    """Wide frame of adjusted closes; NaN before a ticker's inception."""
    rng = np.random.default_rng(seed)
    dates = business_days(start, end)
    n = len(dates)

    crisis = np.zeros(n, dtype=bool)
    for lo, hi in CRISIS_REGIMES:
        crisis |= (dates >= pd.Timestamp(lo)) & (dates <= pd.Timestamp(hi))
    scale = np.where(crisis, 3.0, 1.0)

    equity = rng.standard_normal(n) * 0.009 * scale + np.where(crisis, -0.0015, 0.0003)
    rates = rng.standard_normal(n) * 0.004 * np.sqrt(scale) + 0.00005
    gold = rng.standard_normal(n) * 0.009 * np.sqrt(scale) + 0.0002

    rets = {
        "SPY": equity,
        "IEF": -0.15 * equity + rates,
        "GLD": 0.05 * equity - 0.2 * rates + gold,
    }
    for ticker in SECTOR_ETFS:
        beta_eq, beta_rt, idio = _SECTOR_LOADINGS[ticker]
        rets[ticker] = beta_eq * equity + beta_rt * rates + rng.standard_normal(n) * idio * scale

    frame = pd.DataFrame(index=dates)
    for ticker, r in rets.items():
        r = np.clip(r, -0.2, 0.2)
        prices = 100.0 * np.exp(np.cumsum(r))
        col = pd.Series(prices, index=dates)
        if ticker in INCEPTION:
            col.loc[dates < pd.Timestamp(INCEPTION[ticker])] = np.nan
        frame[ticker] = col
    frame.index.name = "date"
    return frame


def _epoch_ms(ts: pd.Timestamp) -> int:
    return int(ts.tz_localize("UTC").value // 1_000_000)


def news_window(as_of: str, days: int = 30) -> tuple[int, int]:
    end = pd.Timestamp(as_of) + pd.Timedelta(hours=23, minutes=59, seconds=59)
    return _epoch_ms(end - pd.Timedelta(days=days)), _epoch_ms(end)


def synthetic_headlines(country: str, n: int, window: tuple[int, int], seed: int = 7) -> list[tuple[int, str]]:
    """n raw (published_at, title) pairs with roughly 10% repeated titles."""
    if n <= 0:
        return []
    country_key = sum(country.encode("utf-8"))
    rng = np.random.default_rng([seed, country_key])
    raw = []
    for i in range(n):
        if raw and rng.random() < 0.1:
            title = raw[int(rng.integers(len(raw)))][1]
        else:
            title = (
                f"{country} {_TOPICS[int(rng.integers(len(_TOPICS)))]} "
                f"{_MOVES[int(rng.integers(len(_MOVES)))]} "
                f"{_QUALIFIERS[int(rng.integers(len(_QUALIFIERS)))]} ({i:03d})"
            )
        ts = int(rng.integers(window[0], window[1]))
        raw.append((ts, title))
    return raw


def write_fixture_bundle(out_dir: str | Path, seed: int = 7, as_of: str = "2025-09-30", countries=None) -> dict[str, Path]:
    """Write prices.csv and headlines/ under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prices_path = out_dir / "prices.csv"
    write_prices(prices_path, synthetic_prices(seed, end=as_of))
    logger.info(f"stage=fixtures event=prices_written file={prices_path}")

    window = news_window(as_of)
    headlines_dir = out_dir / "headlines"
    for country in countries or _HEADLINE_POOL_SIZES:
        n = _HEADLINE_POOL_SIZES.get(country, 25)
        query = f"{country} economy OR markets OR central bank"
        snapshot = build_headline_snapshot(
            synthetic_headlines(country, n, window, seed), window, query, country=country
        )
        save_headline_snapshot(headlines_dir, snapshot)
    logger.info(f"stage=fixtures event=headlines_written dir={headlines_dir}")
    return {"prices": prices_path, "headlines": headlines_dir}
