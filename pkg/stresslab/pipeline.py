"""
Stage orchestration shared by every CLI subcommand.

Each stage reads its upstream artifacts from the output directory (never
from another stage's memory), writes its own, and refreshes the run
manifest. A missing upstream artifact raises MissingArtifactError naming
the manifest entry.
"""
from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd

from stresslab.audit.plausibility import audit_candidates
from stresslab.audit.regime import make_regime_classifier
from stresslab.baselines.benchmarks import deterministic_benchmarks
from stresslab.baselines.envelopes import crisis_envelopes, envelope_table, load_episode_metrics
from stresslab.baselines.ewma import ewma_var
from stresslab.baselines.garch import fit_garch_t, garch_var
from stresslab.baselines.historical import (
    BASELINE_WINDOWS,
    UNCONDITIONAL_ID,
    BaselineResult,
    baseline_table,
    historical_baselines,
    load_baseline_metrics,
    load_baseline_results,
    portfolio_returns,
)
from stresslab.config.config import generate_run_id
from stresslab.core.errors import GarchFitError, MissingArtifactError, SerializationError
from stresslab.core.model import (
    CHANNELS,
    CRISIS_EPISODES,
    RunConfig,
    Scenario,
    canonical_serialize,
    parse_scenario,
    read_scenarios,
    sha256_hex,
    write_scenarios,
)
from stresslab.diagnostics import tables
from stresslab.diagnostics.anova import anova_table
from stresslab.diagnostics.dispersion import dispersion_by_prompt, stability_by_country_config
from stresslab.diagnostics.fairness import fairness_card, fairness_table
from stresslab.generation.grid import read_candidates, record_fixtures, run_grid, write_candidates
from stresslab.generation.providers import make_provider
from stresslab.ingest_tools.headlines import load_headline_snapshot, snapshot_paths
from stresslab.ingest_tools.prices import eligible_tickers, load_prices, log_returns
from stresslab.ingest_tools.synthetic import SECTOR_ETFS
from stresslab.ingest_tools.weo import load_baselines
from stresslab.provenance.hashing import hash_artifacts
from stresslab.provenance.manifest import (
    MANIFEST_NAME,
    RunManifest,
    closure_gaps,
    load_manifest,
    output_files,
    utc_now,
    write_manifest,
)
from stresslab.retrieval.embedding import make_embedding_provider
from stresslab.retrieval.index import load_index, retrieval_seed, save_index
from stresslab.retrieval.retriever import ContextRetriever, retrieval_qc
from stresslab.risk.channels import read_risk_report, run_risk_grid, write_risk_report
from stresslab.risk.covariance import CovariancePair, build_covariance_pair
from stresslab.risk.factors import FACTOR_ASSETS, fit_betas, fit_pca, load_factor_model, save_factor_model
from stresslab.risk.simulation import Portfolio, portfolio_a, portfolio_b

logger = logging.getLogger(__name__)

# manifest keys of stage outputs, relative to the output directory
UNIVERSE = "ingest/universe.json"
INDEX_FILE = "index/profiles.idx"
RETRIEVAL_QC = "index/retrieval_qc.csv"
HEADLINES_SELECTED = "index/diverse_headlines.json"
CANDIDATES = "generate/candidates.jsonl"
GRID_SUMMARY = "generate/grid_summary.json"
AUDIT_TABLE = "audit/audit.csv"
ANNOTATED = "audit/scenarios_annotated.jsonl"
ACCEPTED = "audit/scenarios_accepted.jsonl"
BENCHMARKS = "audit/benchmarks_annotated.jsonl"
FACTOR_MODEL = "factors/factor_model.json"
COV_CALM = "factors/cov_calm.csv"
COV_CRISIS = "factors/cov_crisis.csv"
BASELINES = "baselines/baselines.csv"
RISK_REPORT = "simulate/risk_report.csv"
RISK_CROSSRUN = "simulate/risk_crossrun.csv"
SCENARIO_INPUT = "simulate/scenarios_input.jsonl"
BENCHMARK_RISK = "simulate/benchmark_risk.csv"
ENVELOPES = "envelopes/envelopes.csv"
ENVELOPES_REPORTED = "envelopes/envelopes_reported.csv"
DIAGNOSTICS_DIR = "diagnostics"

STAGE_ORDER = (
    "ingest", "index", "generate", "audit", "fit-factors", "baselines", "simulate", "envelopes", "diagnostics",
    "report",
)


def _write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def _write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _write_cov(path: Path, assets: Sequence[str], matrix: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(matrix, index=list(assets), columns=list(assets)).to_csv(
        path, float_format="%.17g", lineterminator="\n", index_label="asset"
    )
    return path


def _read_cov(path: Path) -> tuple[tuple[str, ...], np.ndarray]:
    frame = pd.read_csv(path, index_col="asset")
    return tuple(frame.index), frame.to_numpy(dtype=float)


def read_scenario_file(path: Path) -> list[Scenario]:
    """Scenarios from a JSONL file or a JSON object/array file."""
    if not path.exists():
        raise MissingArtifactError(str(path), path)
    if path.suffix.lower() != ".json":
        return read_scenarios(path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SerializationError(f"{path}: invalid JSON ({e})")
    return [parse_scenario(item) for item in (data if isinstance(data, list) else [data])]


class StressPipeline:
    def __init__(
        self,
        cfg: RunConfig,
        out_dir: str | Path,
        provider_spec: str | None = None,
        offline: bool = True,
        run_id: str | None = None,
        portfolios: Sequence[str] = ("A", "B"),
        channels: Sequence[str] = CHANNELS,
        workers: int | None = None,
        workspace_tag: str = "stresslab",
        config_dir: str | Path | None = None,
        scenario_file: str | Path | None = None,
    ):
        self.cfg = cfg
        self.out_dir = Path(out_dir).absolute()
        self.provider_spec = provider_spec or cfg.provider
        self.offline = offline
        self.run_id = run_id or generate_run_id()
        self.portfolio_ids = tuple(portfolios)
        self.channels = tuple(channels)
        self.workers = workers
        self.workspace_tag = workspace_tag
        self.config_dir = Path(config_dir) if config_dir else Path(cfg.weo_path).parent
        self.scenario_file = Path(scenario_file) if scenario_file else None
        self.started_at = utc_now()
        self.stage_log: list[dict[str, str]] = []
        self.provider_calls: list[dict[str, Any]] = []
        self._cache: dict[str, Any] = {}
        self.out_dir.mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------------
    # Paths and shared inputs
    # ------------------------------------------------------------------

    def path(self, key: str) -> Path:
        return self.out_dir / key

    def require(self, key: str) -> Path:
        p = self.path(key)
        if not p.exists():
            raise MissingArtifactError(key, p)
        return p

    def _cached(self, name: str, factory: Callable[[], Any]) -> Any:
        if name not in self._cache:
            self._cache[name] = factory()
        return self._cache[name]

    def baselines_weo(self):
        return self._cached("weo", lambda: load_baselines(self.cfg.weo_path))

    def prices(self):
        return self._cached("prices", lambda: load_prices(self.cfg.prices_path))

    def log_rets(self) -> pd.DataFrame:
        return self._cached("log_rets", lambda: log_returns(self.prices()))

    def snapshots(self):
        def load():
            out = {}
            for country in self.cfg.countries:
                csv_path, _ = snapshot_paths(self.cfg.headlines_dir, country)
                if csv_path.exists():
                    out[country] = load_headline_snapshot(self.cfg.headlines_dir, country)
                else:
                    logger.warning(f"run_id={self.run_id} stage=ingest event=snapshot_missing country={country}")
            return out
        return self._cached("snapshots", load)

    def embedding_provider(self):
        return self._cached("embedder", lambda: make_embedding_provider(self.cfg.embedding_provider))

    def universe(self) -> dict[str, Any]:
        with open(self.require(UNIVERSE), "r", encoding="utf-8") as f:
            return json.load(f)

    def portfolios(self) -> list[Portfolio]:
        sectors = self.universe()["sectors"]
        built = {"A": portfolio_a(), "B": portfolio_b(sectors)}
        return [built[pid] for pid in self.portfolio_ids]

    def retriever(self) -> ContextRetriever:
        def build():
            provider = self.embedding_provider()
            index = load_index(self.require(INDEX_FILE))
            if index.weights_hash != provider.weights_hash:
                raise MissingArtifactError(f"{INDEX_FILE} (built with another embedding provider)", self.path(INDEX_FILE))
            retriever = ContextRetriever.build(
                self.baselines_weo(), provider, self.snapshots(), self.cfg.as_of_date, self.cfg.headline_k,
                tie_seed=index.tie_seed,
            )
            return replace(retriever, index=index)
        return self._cached("retriever", build)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def stage_ingest(self) -> dict[str, Any]:
        """Validate inputs and fix the simulation universe."""
        cfg = self.cfg
        weo = self.baselines_weo()
        missing = [c for c in cfg.countries if c not in weo]
        if missing:
            raise MissingArtifactError(f"weo:{','.join(missing)}", cfg.weo_path)
        panel = self.prices()
        windows = {k: tuple(cfg.windows[k]) for k in ("pca", "calm", *CRISIS_EPISODES)}
        anchors = eligible_tickers(panel, FACTOR_ASSETS, cfg.min_history_days, windows)
        if list(anchors) != list(FACTOR_ASSETS):
            raise MissingArtifactError(f"prices:{','.join(sorted(set(FACTOR_ASSETS) - set(anchors)))}", cfg.prices_path)
        sectors = eligible_tickers(panel, [t for t in SECTOR_ETFS if t in panel.tickers], cfg.min_history_days, windows)
        snapshots = self.snapshots()
        payload = {
            "anchors": list(FACTOR_ASSETS),
            "sectors": sectors,
            "dropped": sorted(set(SECTOR_ETFS) - set(sectors)),
            "countries": list(cfg.countries),
            "snapshots": {c: len(s.real_rows) for c, s in sorted(snapshots.items())},
        }
        _write_json(self.path(UNIVERSE), payload)
        logger.info(
            f"run_id={self.run_id} stage=ingest event=universe_fixed sectors={len(sectors)} "
            f"dropped={payload['dropped']} snapshots={len(snapshots)}"
        )
        return payload

    def stage_index(self) -> pd.DataFrame:
        cfg = self.cfg
        provider = self.embedding_provider()
        retriever = ContextRetriever.build(
            self.baselines_weo(), provider, self.snapshots(), cfg.as_of_date, cfg.headline_k,
            tie_seed=cfg.seed,
        )
        save_index(self.path(INDEX_FILE), retriever.index)
        qc = retrieval_qc(retriever, cfg.countries, cfg.top_k)
        _write_csv(self.path(RETRIEVAL_QC), qc)
        selected = {c: retriever.diverse_headlines(c) for c in cfg.countries}
        _write_json(self.path(HEADLINES_SELECTED), selected)
        self._cache["retriever"] = retriever
        return qc

    def stage_generate(self):
        provider = make_provider(self.provider_spec, offline=self.offline, base_dir=self.config_dir)
        retriever = self.retriever() if self.cfg.rag or self.cfg.use_news else None
        result = run_grid(self.cfg, provider, retriever, self.baselines_weo(), self.run_id, self.workers)
        write_candidates(self.path(CANDIDATES), result.records)
        _write_json(self.path(GRID_SUMMARY), {**result.summary(), "provider": result.provider_settings})
        self.provider_calls.extend(getattr(provider, "calls", []))
        return result

    def record_responses(self, path: str | Path) -> int:
        """Run the grid against the configured provider and save a replayable fixture file."""
        provider = make_provider(self.provider_spec, offline=self.offline, base_dir=self.config_dir)
        retriever = None
        if self.cfg.rag or self.cfg.use_news:
            if not self.path(INDEX_FILE).exists():
                self.run_stage("index")
            retriever = self.retriever()
        result = run_grid(self.cfg, provider, retriever, self.baselines_weo(), self.run_id, self.workers)
        count = record_fixtures(path, result.records, provider)
        logger.info(f"run_id={self.run_id} stage=record event=fixtures_recorded path={path} responses={count}")
        return count

    def stage_audit(self) -> pd.DataFrame:
        rows = read_candidates(self.require(CANDIDATES))
        candidates = [parse_scenario(r["scenario"]) for r in rows if r["status"] == "ok"]
        weo = self.baselines_weo()
        classifier = make_regime_classifier(self.cfg.regime_classifier)
        annotated, accepted, table = audit_candidates(candidates, weo, classifier, self.cfg, self.run_id)
        write_scenarios(self.path(ANNOTATED), annotated)
        write_scenarios(self.path(ACCEPTED), accepted)
        _write_csv(self.path(AUDIT_TABLE), table)

        bench = deterministic_benchmarks(weo, self.cfg)
        bench_annotated, _, _ = audit_candidates(bench, weo, classifier, self.cfg, self.run_id)
        write_scenarios(self.path(BENCHMARKS), bench_annotated)
        return table

    def stage_fit_factors(self):
        cfg = self.cfg
        universe = self.universe()
        assets = [*universe["anchors"], *universe["sectors"]]
        rets = self.log_rets()
        pca_start, pca_end = cfg.windows["pca"]
        window = rets.loc[pd.Timestamp(pca_start):pd.Timestamp(pca_end)]
        window = window[window[list(FACTOR_ASSETS)].notna().all(axis=1)]
        factors = fit_pca(window[list(FACTOR_ASSETS)].to_numpy(), seed=cfg.seed)
        betas = fit_betas(window[assets].to_numpy(), factors, assets, cfg.channel_params.drift_cap_daily)
        save_factor_model(self.path(FACTOR_MODEL), factors, betas)

        crisis = {e: tuple(cfg.windows[e]) for e in CRISIS_EPISODES}
        pair = build_covariance_pair(rets, assets, tuple(cfg.windows["calm"]), crisis)
        _write_cov(self.path(COV_CALM), pair.assets, pair.calm)
        _write_cov(self.path(COV_CRISIS), pair.assets, pair.crisis)
        return factors, betas, pair

    def stage_baselines(self) -> pd.DataFrame:
        cfg = self.cfg
        portfolios = self.portfolios()
        rets = self.log_rets()
        boot = historical_baselines(rets, portfolios, cfg.windows, cfg.horizon_days, cfg.bootstrap_resamples,
                                    cfg.seed, self.run_id)
        results: list[BaselineResult] = [r for per in boot.values() for r in per.values()]
        window = tuple(cfg.windows[BASELINE_WINDOWS[UNCONDITIONAL_ID]])
        for p in portfolios:
            series = portfolio_returns(rets, p, window).to_numpy()
            results.append(replace(ewma_var(series, horizon=cfg.horizon_days, window=window),
                                   portfolio_id=p.id, baseline_id=UNCONDITIONAL_ID))
            try:
                fit = fit_garch_t(series)
                results.append(replace(garch_var(fit, cfg.horizon_days, cfg.garch_paths, cfg.seed, window),
                                       portfolio_id=p.id, baseline_id=UNCONDITIONAL_ID))
            except GarchFitError as e:
                logger.error(f"run_id={self.run_id} stage=baselines event=garch_failed portfolio={p.id} error={str(e)}")
                logger.exception("Detailed error information:")
        table = baseline_table(results)
        _write_csv(self.path(BASELINES), table)
        return table

    def _load_risk_inputs(self):
        factors, betas = load_factor_model(self.require(FACTOR_MODEL))
        assets, calm = _read_cov(self.require(COV_CALM))
        crisis_assets, crisis = _read_cov(self.require(COV_CRISIS))
        if assets != crisis_assets:
            raise MissingArtifactError(f"{COV_CRISIS} (asset order differs from {COV_CALM})", self.path(COV_CRISIS))
        return factors, betas, CovariancePair(assets, calm, crisis)

    def stage_simulate(self) -> pd.DataFrame:
        cfg = self.cfg
        factors, betas, pair = self._load_risk_inputs()
        baseline_metrics = load_baseline_metrics(self.require(BASELINES), cfg.baseline_id)
        portfolios = self.portfolios()
        weo = self.baselines_weo()

        if self.scenario_file:
            supplied = read_scenario_file(self.scenario_file)
            classifier = make_regime_classifier(cfg.regime_classifier)
            _, accepted, _ = audit_candidates(supplied, weo, classifier, cfg, self.run_id)
            write_scenarios(self.path(SCENARIO_INPUT), accepted)
        else:
            accepted = read_scenarios(self.require(ACCEPTED))
        risk = run_risk_grid(accepted, factors, betas, pair, portfolios, cfg, baseline_metrics, weo,
                             self.channels, self.run_id, self.workers)
        write_risk_report(self.path(RISK_REPORT), risk)
        _write_csv(self.path(RISK_CROSSRUN), tables.risk_crossrun(risk, self.channels))

        bench_path = self.path(BENCHMARKS)
        bench = [s for s in read_scenarios(bench_path) if s.plausibility_ok == 1] if bench_path.exists() else []
        bench_risk = run_risk_grid(bench, factors, betas, pair, portfolios, cfg, baseline_metrics, weo,
                                   self.channels, self.run_id, self.workers)
        write_risk_report(self.path(BENCHMARK_RISK), bench_risk)
        return risk

    def stage_envelopes(self) -> pd.DataFrame:
        cfg = self.cfg
        boot = load_baseline_results(self.require(BASELINES))
        envelopes = crisis_envelopes(self.log_rets(), self.portfolios(), cfg.windows, boot, cfg.horizon_days, self.run_id)
        table = envelope_table(envelopes)
        _write_csv(self.path(ENVELOPES), table)
        if cfg.episode_metrics_path:
            _write_csv(self.path(ENVELOPES_REPORTED), envelope_table(load_episode_metrics(cfg.episode_metrics_path)))
        return table

    def stage_diagnostics(self) -> dict[str, pd.DataFrame]:
        cfg = self.cfg
        audit = pd.read_csv(self.require(AUDIT_TABLE))
        risk = read_risk_report(self.require(RISK_REPORT))
        pooled = tables.pool_runs(risk, cfg.compare_runs, filename=RISK_REPORT)
        accepted = audit[audit["accepted"] == 1]
        seed = cfg.seed

        out = {
            "macro_summary": tables.macro_summary(accepted),
            "severity_by_model": tables.severity_by_model(audit),
            "risk_crossrun": tables.risk_crossrun(pooled, self.channels),
            "boot_cis": tables.boot_cis(pooled, cfg.ci_resamples, seed),
            "top_scenarios": tables.top_scenarios(risk),
            "country_config_means": tables.country_config_means(risk),
            "news_effect": tables.news_effect(pooled),
            "dispersion_by_prompt": dispersion_by_prompt(accepted, cfg.ci_resamples, seed, cfg.qc_threshold),
            "stability_by_country_config": stability_by_country_config(accepted, cfg.ci_resamples, seed,
                                                                       cfg.qc_threshold),
        }
        if "linear" in self.channels and not risk.empty:
            out["anova"] = anova_table(risk)
        cards = [fairness_card(risk, pid, cfg.countries, cfg.prompt_variants, cfg.configs())
                 for pid in self.portfolio_ids]
        out["fairness"] = fairness_table(cards)
        for name, frame in out.items():
            _write_csv(self.path(f"{DIAGNOSTICS_DIR}/{name}.csv"), frame)
        logger.info(f"run_id={self.run_id} stage=diagnostics event=tables_written tables={sorted(out)}")
        return out

    def stage_report(self) -> list[str]:
        from stresslab.reporting.figures import render_figures
        from stresslab.reporting.summary import write_summary

        figures, missing = render_figures(self.out_dir)
        self.write_manifest()
        write_summary(self.out_dir, load_manifest(self.out_dir), figures, missing)
        self.write_manifest()
        if missing:
            raise MissingArtifactError(", ".join(missing), self.out_dir)
        return [f.name for f in figures]

    STAGES = {
        "ingest": stage_ingest,
        "index": stage_index,
        "generate": stage_generate,
        "audit": stage_audit,
        "fit-factors": stage_fit_factors,
        "baselines": stage_baselines,
        "simulate": stage_simulate,
        "envelopes": stage_envelopes,
        "diagnostics": stage_diagnostics,
        "report": stage_report,
    }

    def run_stage(self, name: str) -> Any:
        logger.info(f"run_id={self.run_id} stage={name} event=stage_started")
        started = utc_now()
        result = self.STAGES[name](self)
        self.stage_log.append({"stage": name, "started_at": started, "finished_at": utc_now()})
        self.write_manifest()
        logger.info(f"run_id={self.run_id} stage={name} event=stage_completed")
        return result

    def run_all(self, stages: Sequence[str] = STAGE_ORDER) -> None:
        for name in stages:
            self.run_stage(name)
        gaps = closure_gaps(load_manifest(self.out_dir), self.out_dir)
        if gaps:
            logger.error(f"run_id={self.run_id} stage=provenance event=closure_gaps files={gaps}")

    # ------------------------------------------------------------------
    # Manifest
    # ------------------------------------------------------------------

    def _input_files(self) -> dict[str, Path]:
        cfg = self.cfg
        named = {}
        for key, value in (("inputs/prices.csv", cfg.prices_path), ("inputs/weo.json", cfg.weo_path),
                           ("inputs/episode_metrics.json", cfg.episode_metrics_path)):
            if value and Path(value).exists():
                named[key] = Path(value)
        for country in cfg.countries:
            for p in snapshot_paths(cfg.headlines_dir, country):
                if p.exists():
                    named[f"inputs/headlines/{p.name}"] = p
        kind, _, arg = self.provider_spec.partition(":")
        if kind == "fixture":
            fixture = Path(arg)
            if not fixture.is_absolute() and not fixture.exists():
                fixture = self.config_dir / fixture
            if fixture.exists():
                named["inputs/responses.jsonl"] = fixture
        return named

    def _metadata(self, digests: dict[str, str]) -> dict[str, Any]:
        cfg = self.cfg
        provider = self.embedding_provider()
        meta: dict[str, Any] = {
            "weo_hash": digests.get("inputs/weo.json"),
            "prices_hash": digests.get("inputs/prices.csv"),
            "headline_csv_hash": {
                c: digests.get(f"inputs/headlines/{snapshot_paths('.', c)[0].name}") for c in cfg.countries
            },
            "pca_factors_hash": digests.get(FACTOR_MODEL),
            "cov_calm_hash": digests.get(COV_CALM),
            "cov_crisis_hash": digests.get(COV_CRISIS),
            "faiss_index_hash": digests.get(INDEX_FILE),
            "minilm_model_hash": provider.weights_hash,
            "embedding_provider": provider.provider_id,
            "retrieval_seed": {c: retrieval_seed(c, cfg.as_of_date) for c in cfg.countries},
            "percentile_method": "linear",
            "channel_params": cfg.to_dict()["channel_params"],
            "scenarios": [],
        }
        if self.path(CANDIDATES).exists() and self.path(ANNOTATED).exists():
            parsed = {}
            for row in read_candidates(self.path(CANDIDATES)):
                if row["status"] == "ok":
                    s = parse_scenario(row["scenario"])
                    parsed[(s.prompt_hash, s.ctx_hash, s.country)] = (
                        sha256_hex(canonical_serialize(s)), row.get("raw_hash"),
                    )
            for s in read_scenarios(self.path(ANNOTATED)):
                parsed_hash, raw_hash = parsed.get((s.prompt_hash, s.ctx_hash, s.country), (None, None))
                meta["scenarios"].append({
                    "scenario_hash": s.scenario_hash,
                    "prompt_hash": s.prompt_hash,
                    "ctx_hash": s.ctx_hash,
                    "parsed_json_hash": parsed_hash,
                    "raw_response_hash": raw_hash,
                    "plausibility_ok": s.plausibility_ok,
                    "plausibility_score": s.plausibility_score,
                    "regime_label_text": s.regime_label,
                    "regime_score_text": s.regime_score,
                    "lambda": s.lambda_,
                })
            meta["scenarios"].sort(key=lambda r: r["scenario_hash"])
        return meta

    def write_manifest(self) -> RunManifest:
        named = {**self._input_files(), **output_files(self.out_dir)}
        entries = hash_artifacts(named, self.workers)
        digests = {e.path: e.sha256 for e in entries}
        previous = {}
        manifest_path = self.path(MANIFEST_NAME)
        if manifest_path.exists():
            previous = load_manifest(manifest_path).volatile
        stages = [s for s in previous.get("stages", []) if s not in self.stage_log] + self.stage_log
        calls = self.provider_calls
        manifest = RunManifest(
            run_id=self.run_id,
            workspace_tag=self.workspace_tag,
            model_config=self.cfg.to_dict(),
            flags={"rag": self.cfg.rag, "use_news": self.cfg.use_news, "offline": self.offline,
                   "provider": self.provider_spec, "portfolios": list(self.portfolio_ids),
                   "channels": list(self.channels)},
            entries=entries,
            metadata=self._metadata(digests),
            volatile={
                "started_at": previous.get("started_at", self.started_at),
                "written_at": utc_now(),
                "stages": stages,
                "provider_calls": len(calls) or previous.get("provider_calls", 0),
                "provider_latency_ms_total": round(sum(c["latency_ms"] for c in calls), 3) if calls
                else previous.get("provider_latency_ms_total", 0.0),
                "provider_tokens_total": sum(c.get("total_tokens", 0) for c in calls) if calls
                else previous.get("provider_tokens_total", 0),
            },
        )
        write_manifest(self.out_dir, manifest)
        return manifest
