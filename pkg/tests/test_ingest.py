from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from stresslab.core.errors import DuplicateKeyError, IngestError
from stresslab.ingest_tools.headlines import (
    PAD_PREFIX,
    SNAPSHOT_ROWS,
    build_headline_snapshot,
    load_headline_snapshot,
    save_headline_snapshot,
)
from stresslab.ingest_tools.prices import PricePanel, eligible_tickers, load_prices, log_returns
from stresslab.ingest_tools.synthetic import news_window, synthetic_prices, write_fixture_bundle
from stresslab.ingest_tools.weo import build_profile, load_baselines
from stresslab.retrieval.diverse import select_diverse_headlines
from stresslab.retrieval.embedding import HashingEmbedder

WORDS = ("bank", "rates", "housing", "oil", "exports", "yen", "bonds", "strike", "tariff", "budget", "jobs", "credit")


def _write_csv(path: Path, rows: list[str]) -> Path:
    path.write_text("date,ticker,adj_close\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_load_prices_sorts_and_pivots(tmp_path: Path) -> None:
    path = _write_csv(tmp_path / "prices.csv", [
        "2024-01-03,SPY,101.0",
        "2024-01-02,IEF,95.0",
        "2024-01-02,SPY,100.0",
        "2024-01-03,IEF,95.5",
    ])
    panel = load_prices(path)
    assert panel.tickers == ["IEF", "SPY"]
    assert list(panel.dates.strftime("%Y-%m-%d")) == ["2024-01-02", "2024-01-03"]
    rets = log_returns(panel)
    assert rets.loc["2024-01-03", "SPY"] == pytest.approx(np.log(1.01))


def test_load_prices_rejects_duplicate_keys(tmp_path: Path) -> None:
    path = _write_csv(tmp_path / "prices.csv", ["2024-01-02,SPY,100.0", "2024-01-02,SPY,100.5"])
    with pytest.raises(DuplicateKeyError, match="line 3"):
        load_prices(path)


def test_load_prices_rejects_gap_inside_active_range(tmp_path: Path) -> None:
    path = _write_csv(tmp_path / "prices.csv", [
        "2024-01-02,SPY,100.0", "2024-01-02,IEF,95.0",
        "2024-01-03,IEF,95.1",
        "2024-01-04,SPY,101.0", "2024-01-04,IEF,95.2",
    ])
    with pytest.raises(IngestError, match="missing prices inside active range"):
        load_prices(path)


def test_load_prices_rejects_nonpositive_and_bad_header(tmp_path: Path) -> None:
    with pytest.raises(IngestError, match="nonpositive price at line 2"):
        load_prices(_write_csv(tmp_path / "neg.csv", ["2024-01-02,SPY,0"]))
    (tmp_path / "header.csv").write_text("day,ticker,close\n", encoding="utf-8")
    with pytest.raises(IngestError, match="expected header"):
        load_prices(tmp_path / "header.csv")


def test_late_inception_ticker_is_dropped() -> None:
    panel = PricePanel(synthetic_prices(seed=3, start="2010-01-04", end="2020-12-31"))
    windows = {"pca": ("2015-01-01", "2020-12-31"), "calm": ("2012-01-01", "2019-12-31")}
    keep = eligible_tickers(panel, ["SPY", "XLRE", "XLF"], min_history_days=1000, windows=windows)
    assert keep == ["SPY", "XLF"]


def test_short_history_ticker_is_dropped() -> None:
    panel = PricePanel(synthetic_prices(seed=3, start="2019-01-01", end="2020-12-31"))
    assert eligible_tickers(panel, ["SPY"], min_history_days=2500) == []


def test_weo_fixture_covers_g7(weo) -> None:
    assert sorted(weo) == ["Canada", "France", "Germany", "Italy", "Japan", "United Kingdom", "United States"]
    assert weo["Canada"].interest_rate == 2.75
    assert {b.vintage for b in weo.values()} == {"WEO-2025-04"}


def test_weo_rejects_duplicates_and_malformed_rows(tmp_path: Path) -> None:
    row = {"country": "Canada", "gdp_growth": 1.4, "inflation": 2.0, "interest_rate": 2.75, "vintage": "v"}
    (tmp_path / "dup.json").write_text(json.dumps([row, row]), encoding="utf-8")
    with pytest.raises(DuplicateKeyError):
        load_baselines(tmp_path / "dup.json")
    (tmp_path / "bad.json").write_text(json.dumps([{"country": "Canada"}]), encoding="utf-8")
    with pytest.raises(IngestError, match="entry 0 malformed"):
        load_baselines(tmp_path / "bad.json")


def test_profile_mentions_every_macro_field(weo) -> None:
    profile = build_profile(weo["Japan"])
    for marker in ("Real GDP growth", "Headline inflation", "Short-term interest rate", "Japan"):
        assert marker in profile


def test_snapshot_sorts_dedups_and_pads() -> None:
    window = (1_000, 2_000)
    raw = [(1500, "b"), (1200, "a"), (1300, "b"), (1200, "0")]
    snapshot = build_headline_snapshot(raw, window, "query", country="Canada")
    assert len(snapshot.rows) == SNAPSHOT_ROWS
    assert [r.title for r in snapshot.real_rows] == ["0", "a", "b"]
    assert snapshot.real_rows[-1].published_at == 1300
    pads = [r for r in snapshot.rows if r.is_pad]
    assert len(pads) == SNAPSHOT_ROWS - 3
    assert all(r.title.startswith(PAD_PREFIX) and r.published_at == 2_000 for r in pads)


def test_snapshot_property_randomized(rng) -> None:
    """Every snapshot has 50 rows; exemplar selection never returns pads and returns min(20, real) titles."""
    embedder = HashingEmbedder(dim=64)
    window = news_window("2025-09-30")
    for case in range(500):
        n_unique = int(rng.integers(0, 90))
        n_raw = int(rng.integers(0, 120))
        pool = [
            f"{WORDS[int(rng.integers(len(WORDS)))]} {WORDS[int(rng.integers(len(WORDS)))]} item{j}"
            for j in range(n_unique)
        ]
        raw = []
        if pool:
            raw = [(int(rng.integers(window[0], window[1])), pool[int(rng.integers(len(pool)))]) for _ in range(n_raw)]
        snapshot = build_headline_snapshot(raw, window, "q", country=f"case{case}")

        assert len(snapshot.rows) == SNAPSHOT_ROWS
        real = snapshot.real_rows
        titles = [r.title for r in real]
        assert len(set(titles)) == len(titles)
        assert len(real) == min(SNAPSHOT_ROWS, len({t for _, t in raw}))

        chosen = select_diverse_headlines(snapshot, embedder, k=20, seed=case)
        assert len(chosen) == min(20, len(real))
        assert not any(t.startswith(PAD_PREFIX) for t in chosen)
        assert set(chosen) <= set(titles)
        assert chosen == [t for t in titles if t in set(chosen)]


def test_snapshot_round_trip_on_disk(tmp_path: Path) -> None:
    window = (10, 20)
    snapshot = build_headline_snapshot([(11, "rates rise"), (12, "yen slides")], window, "Japan economy", "Japan")
    csv_path, sidecar = save_headline_snapshot(tmp_path, snapshot)
    assert csv_path.name == "Japan_headlines.csv" and sidecar.exists()
    loaded = load_headline_snapshot(tmp_path, "Japan")
    assert loaded.rows == snapshot.rows
    assert loaded.window == window and loaded.query == "Japan economy"


def test_snapshot_with_wrong_row_count_is_rejected(tmp_path: Path) -> None:
    snapshot = build_headline_snapshot([(11, "a")], (10, 20), "q", "France")
    csv_path, _ = save_headline_snapshot(tmp_path, snapshot)
    frame = pd.read_csv(csv_path).iloc[:10]
    frame.to_csv(csv_path, index=False)
    with pytest.raises(IngestError, match="expected 50 rows"):
        load_headline_snapshot(tmp_path, "France")


def test_fixture_bundle_writes_loadable_inputs(tmp_path: Path) -> None:
    paths = write_fixture_bundle(tmp_path, seed=5, as_of="2012-06-29", countries=["Canada", "United Kingdom"])
    panel = load_prices(paths["prices"])
    assert "XLRE" not in panel.tickers or panel.frame["XLRE"].isna().all()
    assert panel.dates[-1] == pd.Timestamp("2012-06-29")
    snapshot = load_headline_snapshot(paths["headlines"], "United Kingdom")
    assert snapshot.country == "United Kingdom"
    assert len(snapshot.rows) == SNAPSHOT_ROWS
