"""
Run manifest (run_artifacts_index.json) and replay verification.

The manifest has a "stable" section, byte-identical across replays of the
same frozen inputs and seed, and a "volatile" section (run id, timestamps,
provider call accounting) that verification ignores.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from stresslab.core.errors import MissingArtifactError, ReplayStructureError
from stresslab.provenance.hashing import ArtifactEntry

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_artifacts_index.json"
MANIFEST_VERSION = 1
# files under the output directory that are never manifest entries
CLOSURE_EXEMPT = (MANIFEST_NAME,)


@dataclass
class RunManifest:
    run_id: str
    workspace_tag: str
    model_config: Mapping[str, Any]
    flags: Mapping[str, Any]
    entries: list[ArtifactEntry] = field(default_factory=list)
    metadata: Mapping[str, Any] = field(default_factory=dict)
    volatile: dict[str, Any] = field(default_factory=dict)

    def stable(self) -> dict[str, Any]:
        return {
            "manifest_version": MANIFEST_VERSION,
            "workspace_tag": self.workspace_tag,
            "model_config": self.model_config,
            "flags": self.flags,
            "entries": [e.to_dict() for e in sorted(self.entries, key=lambda e: e.path)],
            "metadata": self.metadata,
        }

    def to_dict(self) -> dict[str, Any]:
        return {"stable": self.stable(), "volatile": {"run_id": self.run_id, **self.volatile}}

    def digests(self) -> dict[str, str]:
        return {e.path: e.sha256 for e in self.entries}


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def stable_bytes(manifest: RunManifest) -> bytes:
    return (json.dumps(manifest.stable(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest.to_dict(), f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")
    logger.info(f"run_id={manifest.run_id} stage=provenance event=manifest_written entries={len(manifest.entries)}")
    return path


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise MissingArtifactError(MANIFEST_NAME, path)
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    stable, volatile = data["stable"], dict(data.get("volatile", {}))
    return RunManifest(
        run_id=volatile.pop("run_id", ""),
        workspace_tag=stable["workspace_tag"],
        model_config=stable["model_config"],
        flags=stable["flags"],
        entries=[ArtifactEntry(e["path"], e["sha256"], e.get("row_count")) for e in stable["entries"]],
        metadata=stable.get("metadata", {}),
        volatile=volatile,
    )


@dataclass(frozen=True, slots=True)
class ReplayReport:
    matching: tuple[str, ...]
    mismatching: tuple[str, ...]
    metadata_match: bool

    @property
    def all_match(self) -> bool:
        return not self.mismatching and self.metadata_match


def verify_replay(a: RunManifest, b: RunManifest) -> ReplayReport:
    """Per-entry digest comparison; the volatile sections are never compared."""
    da, db = a.digests(), b.digests()
    if set(da) != set(db):
        raise ReplayStructureError(missing_in_a=set(db) - set(da), missing_in_b=set(da) - set(db))
    matching = tuple(k for k in sorted(da) if da[k] == db[k])
    mismatching = tuple(k for k in sorted(da) if da[k] != db[k])
    metadata_match = json.dumps(a.metadata, sort_keys=True) == json.dumps(b.metadata, sort_keys=True)
    report = ReplayReport(matching, mismatching, metadata_match)
    logger.info(
        f"stage=verify event=replay_compared entries={len(da)} matching={len(matching)} "
        f"mismatching={len(mismatching)} metadata_match={metadata_match}"
    )
    return report


def output_files(out_dir: str | Path, exempt: Sequence[str] = CLOSURE_EXEMPT) -> dict[str, Path]:
    """{posix relative path: file} for every regular file under out_dir."""
    root = Path(out_dir)
    return {
        p.relative_to(root).as_posix(): p
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.relative_to(root).as_posix() not in exempt
    }


def closure_gaps(manifest: RunManifest, out_dir: str | Path) -> list[str]:
    """Output files that no manifest entry covers."""
    known = set(manifest.digests())
    return [rel for rel in output_files(out_dir) if rel not in known]
