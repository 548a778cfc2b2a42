"""
IMF WEO country baselines and the plain-text country profiles built from them.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from stresslab.core.errors import DuplicateKeyError, IngestError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class CountryBaseline:
    country: str
    gdp_growth: float
    inflation: float
    interest_rate: float
    vintage: str


def load_baselines(path: str | Path) -> dict[str, CountryBaseline]:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"WEO baseline file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            rows = json.load(f)
        except json.JSONDecodeError as e:
            raise IngestError(f"{path}: invalid JSON ({e})")
    if not isinstance(rows, list):
        raise IngestError(f"{path}: expected a JSON array of country baselines")

    out: dict[str, CountryBaseline] = {}
    for i, row in enumerate(rows):
        try:
            baseline = CountryBaseline(
                country=str(row["country"]),
                gdp_growth=float(row["gdp_growth"]),
                inflation=float(row["inflation"]),
                interest_rate=float(row["interest_rate"]),
                vintage=str(row["vintage"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise IngestError(f"{path}: entry {i} malformed ({e})")
        if not all(math.isfinite(v) for v in (baseline.gdp_growth, baseline.inflation, baseline.interest_rate)):
            raise IngestError(f"{path}: entry {i} ({baseline.country}) has non-finite values")
        if not baseline.vintage.strip():
            raise IngestError(f"{path}: entry {i} ({baseline.country}) has an empty vintage")
        if baseline.country in out:
            raise DuplicateKeyError(f"{path}: duplicate country {baseline.country}")
        out[baseline.country] = baseline

    logger.info(f"stage=ingest event=weo_loaded file={path.name} countries={len(out)}")
    return out


def build_profile(baseline: CountryBaseline, headlines: Sequence[str] | None = None) -> str:
    """Country profile text as stored in the knowledge base."""
    lines = [
        f"Country: {baseline.country}",
        f"Source: IMF World Economic Outlook ({baseline.vintage})",
        f"Real GDP growth (% y/y): {baseline.gdp_growth:.2f}",
        f"Headline inflation (% y/y): {baseline.inflation:.2f}",
        f"Short-term interest rate (%): {baseline.interest_rate:.2f}",
    ]
    if headlines:
        lines.append("Recent headlines:")
        lines.extend(f"- {h}" for h in headlines)
    return "\n".join(lines)
