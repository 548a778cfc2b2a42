from __future__ import annotations

from pathlib import Path

import pandas as pd

from stresslab.provenance.hashing import hash_artifacts
from stresslab.provenance.manifest import RunManifest
from stresslab.reporting.figures import FIGURES, render_figures
from stresslab.reporting.summary import summary_markdown
from stresslab.risk.channels import RISK_COLUMNS


def _risk_csv(path: Path) -> None:
    rows = []
    for i, (country, news) in enumerate([("Canada", False), ("Canada", True), ("Japan", False), ("Japan", True)]):
        for channel in ("vol", "linear", "nonlinear"):
            row = {c: 0.0 for c in RISK_COLUMNS}
            row.update({"scenario_hash": f"h{i}", "portfolio_id": "A", "channel": channel, "country": country,
                        "model": "m", "rag": True, "use_news": news, "prompt_variant": "v01",
                        "var_mult": 1.0 + i / 10, "cvar_mult": 1.2 + i / 10, "d_inflation": 0.5 * i})
            rows.append(row)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=RISK_COLUMNS).to_csv(path, index=False)


def test_figures_are_byte_stable_and_report_missing_sources(tmp_path: Path) -> None:
    _risk_csv(tmp_path / "simulate" / "risk_report.csv")
    rendered, missing = render_figures(tmp_path)
    assert {spec.source for spec in rendered} == {"simulate/risk_report.csv"}
    assert "baselines/baselines.csv" in missing and "audit/audit.csv" in missing

    first = {spec.path: (tmp_path / spec.path).read_bytes() for spec in rendered}
    render_figures(tmp_path)
    assert {spec.path: (tmp_path / spec.path).read_bytes() for spec in rendered} == first
    assert all(b"<svg" in content for content in first.values())


def test_summary_links_figures_to_digests(tmp_path: Path) -> None:
    _risk_csv(tmp_path / "simulate" / "risk_report.csv")
    rendered, missing = render_figures(tmp_path)
    entries = hash_artifacts({"simulate/risk_report.csv": tmp_path / "simulate" / "risk_report.csv"}, workers=1)
    manifest = RunManifest("r", "stresslab", {"model_id": "m", "seed": 42}, {"rag": True}, entries)
    text = summary_markdown(manifest, rendered, missing)
    assert entries[0].sha256 in text
    assert "| 12 |" in text
    assert "## Missing inputs" in text
    assert len(FIGURES) == len(rendered) + len(missing)
