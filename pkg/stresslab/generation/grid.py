"""
Generation grid: one attempt per (country, rag, news, variant) cell.
"""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import pandas as pd
from tqdm import tqdm

from stresslab.config.worker_config import resolve_workers
from stresslab.core.errors import ExtractionError, MissingArtifactError
from stresslab.core.model import RunConfig, Scenario, canonical_bytes, validate_scenario
from stresslab.generation.extraction import extract_first_json
from stresslab.generation.prompts import PromptBundle, build_prompt
from stresslab.generation.providers import GenerationProvider
from stresslab.ingest_tools.weo import CountryBaseline
from stresslab.retrieval.retriever import ContextRetriever

logger = logging.getLogger(__name__)

STATUSES = ("ok", "malformed", "failed")


@dataclass(frozen=True, slots=True)
class GridCell:
    country: str
    rag: bool
    use_news: bool
    prompt_variant: str


@dataclass(frozen=True, slots=True)
class CandidateRecord:
    cell: GridCell
    status: str
    prompt_hash: str
    ctx_hash: str
    raw_text: str | None = None
    raw_hash: str | None = None
    scenario: Scenario | None = None
    error: str = ""

    def to_row(self) -> dict[str, Any]:
        return {
            "country": self.cell.country,
            "rag": self.cell.rag,
            "use_news": self.cell.use_news,
            "prompt_variant": self.cell.prompt_variant,
            "status": self.status,
            "prompt_hash": self.prompt_hash,
            "ctx_hash": self.ctx_hash,
            "raw_hash": self.raw_hash,
            "error": self.error,
            "scenario": self.scenario.to_record() if self.scenario else None,
        }


@dataclass
class GridResult:
    records: list[CandidateRecord]
    provider_settings: dict[str, Any] = field(default_factory=dict)

    @property
    def candidates(self) -> list[Scenario]:
        return [r.scenario for r in self.records if r.status == "ok"]

    def summary(self) -> dict[str, Any]:
        counts = Counter(r.status for r in self.records)
        total = len(self.records)
        return {
            "attempts": total,
            **{status: counts.get(status, 0) for status in STATUSES},
            "malformed_rate": (counts.get("malformed", 0) / total) if total else 0.0,
        }


def grid_cells(cfg: RunConfig) -> list[GridCell]:
    """Canonical order: country, rag, news, variant."""
    return [
        GridCell(country, rag, news, variant)
        for country in cfg.countries
        for rag, news in cfg.configs()
        for variant in cfg.prompt_variants
    ]


def timestamp_for(as_of_date: str) -> int:
    """UTC epoch ms at the end of the as-of day."""
    ts = pd.Timestamp(as_of_date).tz_localize("UTC") + pd.Timedelta(hours=23, minutes=59, seconds=59)
    return int(ts.value // 1_000_000)


def bundle_for(cell: GridCell, cfg: RunConfig, baselines: Mapping[str, CountryBaseline],
               retriever: ContextRetriever | None) -> PromptBundle:
    if cell.country not in baselines:
        raise MissingArtifactError(f"weo:{cell.country}")
    retrieved: list[tuple[str, str]] = []
    headlines: list[str] = []
    if cell.rag and retriever is not None:
        retrieved = [(peer, retriever.profiles[peer]) for peer, _ in retriever.retrieve(cell.country, cfg.top_k)]
    if cell.use_news and retriever is not None:
        headlines = retriever.diverse_headlines(cell.country)
    return build_prompt(cell.country, baselines[cell.country], retrieved, headlines,
                        cell.prompt_variant, cell.rag, cell.use_news)


def _attempt(cell: GridCell, bundle: PromptBundle, provider: GenerationProvider, cfg: RunConfig,
             run_id: str) -> CandidateRecord:
    base = dict(cell=cell, prompt_hash=bundle.prompt_hash, ctx_hash=bundle.ctx_hash)
    try:
        raw = provider.generate(bundle, cfg.seed)
    except Exception as e:
        logger.error(
            f"run_id={run_id} stage=generate event=cell_failed country={cell.country} "
            f"rag={cell.rag} news={cell.use_news} variant={cell.prompt_variant} error={str(e)}"
        )
        logger.exception("Detailed error information:")
        return CandidateRecord(status="failed", error=str(e), **base)

    raw_hash = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    try:
        obj = extract_first_json(raw)
    except ExtractionError as e:
        logger.warning(
            f"run_id={run_id} stage=generate event=cell_malformed country={cell.country} "
            f"variant={cell.prompt_variant} error={str(e)}"
        )
        return CandidateRecord(status="malformed", raw_text=raw, raw_hash=raw_hash, error=str(e), **base)

    # provenance is stamped by the pipeline, not taken from the model
    obj = {k: v for k, v in obj.items() if k in
           ("country", "title", "gdp_growth", "inflation", "interest_rate", "rationale", "risk_sectors")}
    if obj.get("country") not in (None, cell.country):
        logger.debug(f"run_id={run_id} stage=generate event=country_restamped from={obj.get('country')} to={cell.country}")
    obj.update(
        country=cell.country,
        rag=cell.rag,
        use_news=cell.use_news,
        model=provider.model_id,
        model_version=provider.model_version,
        provider=provider.provider_name,
        prompt_variant=cell.prompt_variant,
        prompt_hash=bundle.prompt_hash,
        ctx_hash=bundle.ctx_hash,
        seed=cfg.seed,
        timestamp_utc=timestamp_for(cfg.as_of_date),
    )
    result = validate_scenario(obj)
    if isinstance(result, list):
        detail = "; ".join(str(v) for v in result)
        logger.warning(
            f"run_id={run_id} stage=generate event=cell_malformed country={cell.country} "
            f"variant={cell.prompt_variant} violations={detail}"
        )
        return CandidateRecord(status="malformed", raw_text=raw, raw_hash=raw_hash, error=detail, **base)
    return CandidateRecord(status="ok", raw_text=raw, raw_hash=raw_hash, scenario=result, **base)


def run_grid(
    cfg: RunConfig,
    provider: GenerationProvider,
    retriever: ContextRetriever | None,
    baselines: Mapping[str, CountryBaseline],
    run_id: str = "",
    workers: int | None = None,
) -> GridResult:
    """
    Attempt every grid cell once. Failures are recorded per cell and never
    abort the run; output order is canonical regardless of completion order.
    """
    cells = grid_cells(cfg)
    bundles = [bundle_for(cell, cfg, baselines, retriever) for cell in cells]
    n_workers = workers or resolve_workers("generation")
    logger.info(
        f"run_id={run_id} stage=generate event=grid_started cells={len(cells)} "
        f"provider={provider.provider_name} model={provider.model_id} workers={n_workers}"
    )

    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_attempt, cell, bundle, provider, cfg, run_id) for cell, bundle in zip(cells, bundles)]
        records = [f.result() for f in tqdm(futures, desc="generate", unit="cell", disable=None)]

    result = GridResult(records, provider.settings())
    summary = result.summary()
    logger.info(
        f"run_id={run_id} stage=generate event=grid_completed attempts={summary['attempts']} "
        f"ok={summary['ok']} malformed={summary['malformed']} failed={summary['failed']}"
    )
    return result


def write_candidates(path: str | Path, records: Sequence[CandidateRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        for record in records:
            f.write(canonical_bytes(record.to_row()) + b"\n")
    return path


def read_candidates(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("candidates", str(path))
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def record_fixtures(path: str | Path, records: Sequence[CandidateRecord], provider: GenerationProvider) -> int:
    """Write replayable `{prompt_hash, ctx_hash, response}` lines for every answered cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    seen: set[tuple[str, str]] = set()
    count = 0
    with open(path, "wb") as f:
        for record in records:
            key = (record.prompt_hash, record.ctx_hash)
            if record.raw_text is None or key in seen:
                continue
            seen.add(key)
            row = {
                "prompt_hash": record.prompt_hash,
                "ctx_hash": record.ctx_hash,
                "response": record.raw_text,
                "model_id": provider.model_id,
                "model_version": provider.model_version,
                "provider": provider.provider_name,
            }
            f.write(canonical_bytes(row) + b"\n")
            count += 1
    logger.info(f"stage=record event=fixtures_written file={path} responses={count}")
    return count
