"""Streaming SHA-256 of artifacts, with data-row counts for CSV files."""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from stresslab.config.worker_config import resolve_workers
from stresslab.core.errors import MissingArtifactError

logger = logging.getLogger(__name__)

CHUNK_BYTES = 1 << 20


@dataclass(frozen=True, slots=True)
class ArtifactEntry:
    path: str
    sha256: str
    row_count: int | None = None

    def to_dict(self) -> dict:
        return {"path": self.path, "sha256": self.sha256, "row_count": self.row_count}


def hash_artifact(path: str | Path) -> tuple[str, int | None]:
    """(hex digest, data rows) where data rows = physical lines minus the header, CSV only."""
    path = Path(path)
    digest = hashlib.sha256()
    lines = 0
    last = b""
    try:
        with open(path, "rb") as f:
            while chunk := f.read(CHUNK_BYTES):
                digest.update(chunk)
                lines += chunk.count(b"\n")
                last = chunk[-1:]
    except OSError as e:
        raise MissingArtifactError(str(path), path) from e
    row_count = None
    if path.suffix.lower() == ".csv":
        if last and last != b"\n":
            lines += 1
        row_count = max(0, lines - 1)
    return digest.hexdigest(), row_count


def hash_artifacts(named: Mapping[str, str | Path], workers: int | None = None) -> list[ArtifactEntry]:
    """Entries for {manifest key: file path}, sorted by key."""
    workers = workers or resolve_workers("hashing")
    keys = sorted(named)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda k: hash_artifact(named[k]), keys))
    entries = [ArtifactEntry(k, digest, rows) for k, (digest, rows) in zip(keys, results)]
    logger.debug(f"stage=provenance event=artifacts_hashed count={len(entries)}")
    return entries
