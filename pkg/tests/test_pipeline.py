from __future__ import annotations

import json
import shutil
from pathlib import Path

import pandas as pd
import pytest

from stresslab.cli import REPLAY_MISMATCH_EXIT, main
from stresslab.core.errors import MissingArtifactError, SerializationError
from stresslab.core.model import ChannelParams, RunConfig, read_scenarios, write_scenarios
from stresslab.ingest_tools.synthetic import write_fixture_bundle
from stresslab.pipeline import (
    ACCEPTED,
    BASELINES,
    ENVELOPES,
    ENVELOPES_REPORTED,
    FACTOR_MODEL,
    RISK_REPORT,
    SCENARIO_INPUT,
    StressPipeline,
    read_scenario_file,
)
from stresslab.provenance.hashing import ArtifactEntry
from stresslab.provenance.manifest import closure_gaps, load_manifest, verify_replay, write_manifest


@pytest.fixture(scope="module")
def replayed_runs(tmp_path_factory, fixtures_dir):
    """Two full runs over the same frozen bundle with different worker counts."""
    root = tmp_path_factory.mktemp("pipeline")
    countries = ("Canada", "Japan")
    bundle = write_fixture_bundle(root / "inputs", seed=5, countries=countries)
    cfg = RunConfig(
        countries=countries,
        prompt_variants=("v01_baseline_severe", "v05_credit_crunch", "v10_contagion", "v15_stagflation"),
        n_paths=1000,
        bootstrap_resamples=2000,
        ci_resamples=200,
        garch_paths=1000,
        channel_params=ChannelParams(),
        prices_path=str(bundle["prices"]),
        headlines_dir=str(bundle["headlines"]),
        weo_path=str(fixtures_dir / "weo.json"),
        episode_metrics_path=str(fixtures_dir / "episode_metrics.json"),
    )
    StressPipeline(cfg, root / "a", workers=2).run_all()
    StressPipeline(cfg, root / "b", workers=1).run_all()
    return cfg, root


@pytest.mark.slow
def test_replay_is_byte_identical(replayed_runs) -> None:
    _, root = replayed_runs
    a, b = load_manifest(root / "a"), load_manifest(root / "b")
    assert a.run_id != b.run_id
    report = verify_replay(a, b)
    assert report.mismatching == ()
    assert report.all_match


@pytest.mark.slow
def test_manifest_covers_every_output(replayed_runs) -> None:
    _, root = replayed_runs
    manifest = load_manifest(root / "a")
    assert closure_gaps(manifest, root / "a") == []
    keys = set(manifest.digests())
    for key in (ACCEPTED, FACTOR_MODEL, BASELINES, RISK_REPORT, ENVELOPES, ENVELOPES_REPORTED,
                "report/summary.md", "inputs/prices.csv", "inputs/weo.json"):
        assert key in keys
    assert {s["scenario_hash"] for s in manifest.metadata["scenarios"]}


@pytest.mark.slow
def test_risk_report_rows_follow_accepted_scenarios(replayed_runs) -> None:
    _, root = replayed_runs
    risk = pd.read_csv(root / "a" / RISK_REPORT)
    accepted = sum(1 for line in open(root / "a" / ACCEPTED, encoding="utf-8") if line.strip())
    assert len(risk) == accepted * 3 * 2
    assert (risk["cvar95"] >= risk["var95"]).all()
    baselines = pd.read_csv(root / "a" / BASELINES)
    assert {"bootstrap", "ewma"} <= set(baselines["method"])


@pytest.mark.slow
def test_cli_verify_exit_codes(replayed_runs, tmp_path: Path) -> None:
    _, root = replayed_runs
    logs = ["--log-dir", str(tmp_path / "logs")]
    assert main(["verify", str(root / "a"), str(root / "b"), *logs]) == 0

    tampered = load_manifest(root / "b")
    tampered.entries = [
        ArtifactEntry(e.path, "0" * 64, e.row_count) if e.path == RISK_REPORT else e for e in tampered.entries
    ]
    write_manifest(tmp_path / "c", tampered)
    assert main(["verify", str(root / "a"), str(tmp_path / "c"), *logs]) == REPLAY_MISMATCH_EXIT


def test_stage_without_upstream_artifact(tmp_path: Path, desk_config) -> None:
    pipeline = StressPipeline(desk_config, tmp_path / "run")
    with pytest.raises(MissingArtifactError) as info:
        pipeline.stage_simulate()
    assert info.value.entry == FACTOR_MODEL


def test_partial_report_is_still_covered_by_the_manifest(tmp_path: Path, desk_config) -> None:
    pipeline = StressPipeline(desk_config, tmp_path / "run")
    with pytest.raises(MissingArtifactError):
        pipeline.stage_report()
    manifest = load_manifest(tmp_path / "run")
    assert "report/summary.md" in manifest.digests()
    assert closure_gaps(manifest, tmp_path / "run") == []


def test_cli_exit_codes_for_missing_inputs(tmp_path: Path, fixtures_dir: Path) -> None:
    logs = ["--log-dir", str(tmp_path / "logs")]
    config = ["--config", str(fixtures_dir / "run_config.json")]
    assert main(["simulate", "--out", str(tmp_path / "empty"), *config, *logs]) == 3
    assert main(["run", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "x"), *logs]) == 2
    assert main(["audit", "--workers", "0", *config, "--out", str(tmp_path / "y"), *logs]) == 2
    assert main(["verify", str(tmp_path / "none_a"), str(tmp_path / "none_b"), *logs]) == 3


def test_cli_writes_fixture_bundle(tmp_path: Path) -> None:
    out = tmp_path / "generated"
    code = main(["fixtures", "--out", str(out), "--as-of", "2012-06-29", "--log-dir", str(tmp_path / "logs")])
    assert code == 0
    assert (out / "prices.csv").exists()
    assert (out / "headlines" / "Canada_headlines.csv").exists()


def test_seed_override_reaches_the_pipeline(tmp_path: Path, fixtures_dir: Path, monkeypatch) -> None:
    seen = {}

    def fake_run_stage(self, name):
        seen["seed"], seen["stage"] = self.cfg.seed, name

    monkeypatch.setattr(StressPipeline, "run_stage", fake_run_stage)
    code = main(["baselines", "--seed", "7", "--config", str(fixtures_dir / "run_config.json"),
                 "--out", str(tmp_path / "run"), "--log-dir", str(tmp_path / "logs")])
    assert code == 0
    assert seen == {"seed": 7, "stage": "baselines"}


@pytest.mark.slow
def test_simulate_reads_supplied_scenario_files(replayed_runs, tmp_path: Path) -> None:
    cfg, root = replayed_runs
    run = tmp_path / "run"
    shutil.copytree(root / "a", run)
    config = tmp_path / "run_config.json"
    config.write_text(json.dumps(cfg.to_dict()), encoding="utf-8")

    supplied = read_scenarios(root / "a" / ACCEPTED)[:2]
    assert supplied
    jsonl = tmp_path / "supplied.jsonl"
    write_scenarios(jsonl, supplied)
    array = tmp_path / "supplied.json"
    array.write_text(json.dumps([s.to_record() for s in supplied]), encoding="utf-8")
    empty = tmp_path / "empty.json"
    empty.write_text("", encoding="utf-8")

    common = ["--config", str(config), "--out", str(run), "--log-dir", str(tmp_path / "logs")]
    for path, expected in ((jsonl, len(supplied)), (array, len(supplied)), (empty, 0)):
        assert main(["simulate", "--scenarios", str(path), *common]) == 0
        assert len(read_scenarios(run / SCENARIO_INPUT)) == expected
        assert len(pd.read_csv(run / RISK_REPORT)) == expected * 3 * 2

    broken = tmp_path / "broken.jsonl"
    broken.write_text("{\"country\": \n", encoding="utf-8")
    assert main(["simulate", "--scenarios", str(broken), *common]) == SerializationError.exit_code


def test_scenario_file_edge_cases(tmp_path: Path, exemplar_record) -> None:
    for name, text in (("blank.json", ""), ("spaces.json", "  \n\t"), ("blank.jsonl", "")):
        (tmp_path / name).write_text(text, encoding="utf-8")
        assert read_scenario_file(tmp_path / name) == []

    single = tmp_path / "single.json"
    single.write_text(json.dumps(exemplar_record), encoding="utf-8")
    assert [s.country for s in read_scenario_file(single)] == [exemplar_record["country"]]

    (tmp_path / "broken.json").write_text("{\"country\": ", encoding="utf-8")
    (tmp_path / "broken.jsonl").write_text(json.dumps(exemplar_record) + "\n{oops\n", encoding="utf-8")
    for name in ("broken.json", "broken.jsonl"):
        with pytest.raises(SerializationError):
            read_scenario_file(tmp_path / name)
    with pytest.raises(MissingArtifactError):
        read_scenario_file(tmp_path / "absent.json")
