from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from stresslab.core.model import ChannelParams, RunConfig, parse_scenario
from stresslab.ingest_tools.prices import PricePanel, log_returns
from stresslab.ingest_tools.synthetic import synthetic_prices
from stresslab.ingest_tools.weo import load_baselines
from stresslab.risk.covariance import build_covariance_pair
from stresslab.risk.factors import FACTOR_ASSETS, fit_betas, fit_pca

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "data" / "fixtures"

RISK_ASSETS = ("SPY", "IEF", "GLD", "XLF", "XLK", "XLE")
SECTORS = ("XLF", "XLK", "XLE")


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def weo():
    return load_baselines(fixture_path("weo.json"))


@pytest.fixture(scope="session")
def exemplar_record() -> dict:
    with open(fixture_path("exemplar_scenario.json"), "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture(scope="session")
def exemplar_scenario(exemplar_record):
    return parse_scenario(exemplar_record)


@pytest.fixture(scope="session")
def log_rets() -> pd.DataFrame:
    frame = synthetic_prices(seed=11, start="2006-01-02", end="2021-06-30")
    return log_returns(PricePanel(frame))


@pytest.fixture(scope="session")
def factor_model(log_rets):
    window = log_rets.loc["2015-01-01":"2021-06-30"]
    factors = fit_pca(window[list(FACTOR_ASSETS)].to_numpy(), seed=42)
    betas = fit_betas(window[list(RISK_ASSETS)].to_numpy(), factors, RISK_ASSETS)
    return factors, betas


@pytest.fixture(scope="session")
def covpair(log_rets):
    return build_covariance_pair(
        log_rets,
        RISK_ASSETS,
        ("2012-01-01", "2019-12-31"),
        {"gfc": ("2008-01-01", "2009-12-31"), "covid": ("2020-01-01", "2020-12-31")},
    )


@pytest.fixture
def desk_config() -> RunConfig:
    """Small grid and path counts; every other setting at its default."""
    return RunConfig(
        countries=("Canada", "Japan"),
        prompt_variants=("v01_baseline_severe", "v05_credit_crunch", "v10_contagion", "v15_stagflation", "v25_inflation_surge"),
        n_paths=2000,
        bootstrap_resamples=2000,
        ci_resamples=500,
        garch_paths=2000,
        channel_params=ChannelParams(),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20251017)


@pytest.fixture(scope="session")
def portfolios():
    from stresslab.risk.simulation import portfolio_a, portfolio_b
    return [portfolio_a(), portfolio_b(SECTORS)]


@pytest.fixture(scope="session")
def baseline_metrics():
    from stresslab.risk.simulation import TailMetrics
    return {"A": TailMetrics(0.0491, 0.0932, -0.04), "B": TailMetrics(0.0820, 0.1240, -0.07)}
