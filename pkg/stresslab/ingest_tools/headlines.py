"""
Fixed-size headline snapshots (CSV plus JSON sidecar).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import pandas as pd

from stresslab.core.errors import IngestError

logger = logging.getLogger(__name__)

SNAPSHOT_ROWS = 50
PAD_PREFIX = "[PAD-"


@dataclass(frozen=True, slots=True)
class HeadlineRow:
    published_at: int  # UTC epoch ms
    title: str
    is_pad: bool = False


@dataclass(frozen=True, slots=True)
class HeadlineSnapshot:
    country: str
    rows: tuple[HeadlineRow, ...]
    window: tuple[int, int]
    query: str
    attempts: int = 1

    @property
    def real_rows(self) -> list[HeadlineRow]:
        return [r for r in self.rows if not r.is_pad]


def pad_title(n: int) -> str:
    return f"{PAD_PREFIX}{n:02d}] No headline available"


def build_headline_snapshot(
    raw: Iterable[tuple[int, str]],
    window: tuple[int, int],
    query: str,
    country: str = "",
    attempts: int = 1,
) -> HeadlineSnapshot:
    """Sort by (published_at, title), drop repeated titles, then truncate or pad to 50 rows."""
    ordered = sorted(((int(ts), str(title)) for ts, title in raw), key=lambda r: (r[0], r[1]))
    seen: set[str] = set()
    real: list[HeadlineRow] = []
    for ts, title in ordered:
        if title in seen:
            continue
        seen.add(title)
        real.append(HeadlineRow(ts, title))
        if len(real) == SNAPSHOT_ROWS:
            break

    n_pad = SNAPSHOT_ROWS - len(real)
    pads = [HeadlineRow(int(window[1]), pad_title(i + 1), True) for i in range(n_pad)]
    if n_pad:
        logger.debug(f"stage=ingest event=headlines_padded country={country} real={len(real)} pads={n_pad}")
    return HeadlineSnapshot(country, tuple(real + pads), (int(window[0]), int(window[1])), query, attempts)


def snapshot_paths(directory: str | Path, country: str) -> tuple[Path, Path]:
    stem = country.replace(" ", "_")
    directory = Path(directory)
    return directory / f"{stem}_headlines.csv", directory / f"{stem}_headlines.json"


def save_headline_snapshot(directory: str | Path, snapshot: HeadlineSnapshot) -> tuple[Path, Path]:
    csv_path, sidecar_path = snapshot_paths(directory, snapshot.country)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "published_at": [r.published_at for r in snapshot.rows],
            "title": [r.title for r in snapshot.rows],
            "is_pad": [int(r.is_pad) for r in snapshot.rows],
        }
    )
    frame.to_csv(csv_path, index=False, lineterminator="\n")
    sidecar = {
        "country": snapshot.country,
        "window_start": snapshot.window[0],
        "window_end": snapshot.window[1],
        "query": snapshot.query,
        "attempts": snapshot.attempts,
    }
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, sidecar_path


def load_headline_snapshot(directory: str | Path, country: str) -> HeadlineSnapshot:
    csv_path, sidecar_path = snapshot_paths(directory, country)
    if not csv_path.exists() or not sidecar_path.exists():
        raise IngestError(f"headline snapshot for {country} not found under {directory}")
    frame = pd.read_csv(csv_path, dtype={"title": str}, keep_default_na=False)
    if len(frame) != SNAPSHOT_ROWS:
        raise IngestError(f"{csv_path}: expected {SNAPSHOT_ROWS} rows, found {len(frame)}")
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    rows = tuple(
        HeadlineRow(int(ts), str(title), bool(int(pad)))
        for ts, title, pad in zip(frame["published_at"], frame["title"], frame["is_pad"])
    )
    return HeadlineSnapshot(
        country=country,
        rows=rows,
        window=(int(sidecar["window_start"]), int(sidecar["window_end"])),
        query=str(sidecar.get("query", "")),
        attempts=int(sidecar.get("attempts", 1)),
    )
