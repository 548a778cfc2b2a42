#!/usr/bin/env python3
"""
stresslab command line.

    stresslab fixtures --out data/generated
    stresslab run --config data/fixtures/run_config.json --out runs/demo
    stresslab simulate --out runs/demo --channel linear
    stresslab verify runs/a runs/b
"""
import argparse
import datetime
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from stresslab import __version__
from stresslab.config.config import DEFAULT_RUN_CONFIG, DEFAULT_SEED, LOG_DIR, LOG_LEVEL, OUTPUT_DIR
from stresslab.core.errors import ConfigError, StressLabError
from stresslab.core.model import CHANNELS, load_run_config

logger = logging.getLogger("stresslab")

STAGE_COMMANDS = (
    "ingest", "index", "generate", "audit", "fit-factors", "baselines", "simulate", "envelopes", "diagnostics",
    "report",
)
# exit status of `verify` when the runs differ
REPLAY_MISMATCH_EXIT = 5


def setup_logging(log_dir, level=LOG_LEVEL):
    """Set up logging configuration"""
    timestamp = datetime.datetime.now().strftime("%Y%m%d")
    log_dir = Path(log_dir)
    log_dir.mkdir(exist_ok=True, parents=True)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(formatter)
    root_logger.addHandler(console)

    main_log_file = log_dir / f"stresslab_{timestamp}.log"
    had_content = main_log_file.exists() and main_log_file.stat().st_size > 0
    file_handler = logging.FileHandler(main_log_file, mode='a')
    file_handler.setFormatter(formatter)
    file_handler.setLevel(level)
    root_logger.addHandler(file_handler)

    if had_content:
        logging.info("=" * 50)
        logging.info(f"stresslab restarted at {datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        logging.info("=" * 50)

    return log_dir, timestamp


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_RUN_CONFIG, help="Run config JSON file")
    common.add_argument("--out", default=OUTPUT_DIR, help="Run output directory")
    common.add_argument("--seed", type=int, default=None, help=f"Override the run seed (default from config, else {DEFAULT_SEED})")
    network = common.add_mutually_exclusive_group()
    network.add_argument("--offline", dest="offline", action="store_true", default=True,
                         help="Forbid network access (default)")
    network.add_argument("--online", dest="offline", action="store_false", help="Allow the http provider")
    common.add_argument("--provider", default=None,
                        help="fixture:<path> | http:<endpoint-config> | synthetic:<seed> (default from config)")
    common.add_argument("--portfolio", choices=["A", "B", "both"], default="both", help="Portfolios to evaluate")
    common.add_argument("--channel", choices=[*CHANNELS, "all"], default="all", help="Risk channels to simulate")
    common.add_argument("--workers", type=int, default=None, help="Worker pool size (capped by STRESSLAB_WORKERS)")
    common.add_argument("--log-dir", default=LOG_DIR, help="Directory to store logs")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="stresslab", description="Macro stress scenarios and portfolio tail risk")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in STAGE_COMMANDS:
        p = sub.add_parser(name, parents=[common], help=f"Run the {name} stage")
        if name == "simulate":
            p.add_argument("--scenarios", default=None, help="Scenario file (JSON or JSONL) instead of the audit output")
            p.add_argument("--prices", default=None, help="Override the price panel path")

    sub.add_parser("run", parents=[common], help="Run every stage in order")

    verify = sub.add_parser("verify", parents=[common], help="Compare two run manifests")
    verify.add_argument("run_a", help="Run directory or manifest file")
    verify.add_argument("run_b", help="Run directory or manifest file")

    fixtures = sub.add_parser("fixtures", parents=[common], help="Write the synthetic input bundle")
    fixtures.add_argument("--as-of", default="2025-09-30", help="Last price date and news window end")
    fixtures.add_argument("--fixture-seed", type=int, default=7, help="Seed of the synthetic generators")

    record = sub.add_parser("record", parents=[common], help="Generate and save a fixture response file")
    record.add_argument("--responses", required=True, help="Output JSONL of recorded responses")
    return parser


def _make_pipeline(args):
    from stresslab.pipeline import StressPipeline

    config_path = Path(args.config)
    cfg = load_run_config(config_path)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "prices", None):
        cfg = replace(cfg, prices_path=str(Path(args.prices).absolute()))
    portfolios = ("A", "B") if args.portfolio == "both" else (args.portfolio,)
    channels = CHANNELS if args.channel == "all" else (args.channel,)
    return StressPipeline(
        cfg,
        out_dir=args.out,
        provider_spec=args.provider,
        offline=args.offline,
        portfolios=portfolios,
        channels=channels,
        workers=args.workers,
        config_dir=config_path.parent,
        scenario_file=getattr(args, "scenarios", None),
    )


def cmd_verify(args) -> int:
    from stresslab.provenance.manifest import load_manifest, verify_replay

    report = verify_replay(load_manifest(args.run_a), load_manifest(args.run_b))
    for key in report.mismatching:
        logger.warning(f"stage=verify event=entry_mismatch entry={key}")
    if not report.metadata_match:
        logger.warning("stage=verify event=metadata_mismatch")
    print(f"matching={len(report.matching)} mismatching={len(report.mismatching)} "
          f"metadata_match={report.metadata_match}")
    return 0 if report.all_match else REPLAY_MISMATCH_EXIT


def cmd_fixtures(args) -> int:
    from stresslab.ingest_tools.synthetic import write_fixture_bundle

    paths = write_fixture_bundle(args.out, seed=args.fixture_seed, as_of=args.as_of)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def cmd_record(args) -> int:
    pipeline = _make_pipeline(args)
    count = pipeline.record_responses(args.responses)
    print(f"recorded {count} responses to {args.responses}")
    return 0


def dispatch(args) -> int:
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "fixtures":
        return cmd_fixtures(args)
    if args.command == "record":
        return cmd_record(args)
    pipeline = _make_pipeline(args)
    logger.info(f"run_id={pipeline.run_id} stage=cli event=command_started command={args.command} out={pipeline.out_dir}")
    if args.command == "run":
        pipeline.run_all()
    else:
        pipeline.run_stage(args.command)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_dir, logging.DEBUG if args.debug else LOG_LEVEL)

    if args.workers is not None and args.workers < 1:
        logger.error("stage=cli event=invalid_workers workers must be >= 1")
        return ConfigError.exit_code
    if args.workers is None and os.getenv("STRESSLAB_WORKERS"):
        logger.debug(f"stage=cli event=workers_capped cap={os.getenv('STRESSLAB_WORKERS')}")

    try:
        return dispatch(args)
    except StressLabError as e:
        logger.error(f"stage=cli event=command_failed command={args.command} error={str(e)}")
        logger.debug("Detailed error information:", exc_info=True)
        return e.exit_code
    except Exception as e:
        logger.error(f"stage=cli event=command_failed command={args.command} error={str(e)}")
        logger.exception("Detailed error information:")
        return 1


if __name__ == "__main__":
    sys.exit(main())
