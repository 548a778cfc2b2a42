"""Markdown summary linking each figure to its source CSV and manifest digest."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

from stresslab.provenance.manifest import RunManifest
from stresslab.reporting.figures import FigureSpec

logger = logging.getLogger(__name__)

SUMMARY_PATH = "report/summary.md"


def summary_markdown(manifest: RunManifest, figures: Sequence[FigureSpec], missing: Sequence[str] = ()) -> str:
    digests = manifest.digests()
    rows = {e.path: e.row_count for e in manifest.entries}
    lines = [
        "# Stress run summary",
        "",
        f"- workspace: `{manifest.workspace_tag}`",
        f"- model: `{manifest.model_config.get('model_id', '')}`",
        f"- seed: `{manifest.model_config.get('seed', '')}`",
        "- flags: " + ", ".join(f"{k}={v}" for k, v in sorted(manifest.flags.items())),
        "",
        "## Figures",
        "",
        "| figure | source CSV | rows | sha256 |",
        "|---|---|---|---|",
    ]
    for spec in figures:
        digest = digests.get(spec.source, "not in manifest")
        lines.append(
            f"| [{spec.title}](figures/{spec.name}.svg) | `{spec.source}` | {rows.get(spec.source, '')} | `{digest}` |"
        )
    if missing:
        lines += ["", "## Missing inputs", ""]
        lines += [f"- `{key}`" for key in missing]
    tables = sorted(k for k in digests if k.startswith("diagnostics/"))
    if tables:
        lines += ["", "## Tables", "", "| table | rows | sha256 |", "|---|---|---|"]
        lines += [f"| `{k}` | {rows.get(k, '')} | `{digests[k]}` |" for k in tables]
    return "\n".join(lines) + "\n"


def write_summary(out_dir: str | Path, manifest: RunManifest, figures: Sequence[FigureSpec],
                  missing: Sequence[str] = ()) -> Path:
    path = Path(out_dir) / SUMMARY_PATH
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(summary_markdown(manifest, figures, missing))
    logger.info(f"stage=report event=summary_written figures={len(figures)} missing={len(missing)}")
    return path
