from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from stresslab.audit.plausibility import derive_shock, hard_gate
from stresslab.baselines.benchmarks import BENCHMARK_MODEL, deterministic_benchmarks
from stresslab.baselines.envelopes import (
    crisis_envelopes,
    envelope_from_metrics,
    envelope_table,
    episode_metrics,
    load_episode_metrics,
)
from stresslab.baselines.ewma import ewma_var, ewma_variance_path
from stresslab.baselines.garch import GarchFit, fit_garch_t, garch_var, simulate_garch_t, variance_path
from stresslab.baselines.historical import (
    CALM_ID,
    UNCONDITIONAL_ID,
    baseline_table,
    block_losses,
    bootstrap_var,
    historical_baselines,
    load_baseline_metrics,
    load_baseline_results,
    portfolio_returns,
)
from stresslab.core.errors import InsufficientDataError, MissingArtifactError, NumericalError
from stresslab.core.model import DEFAULT_WINDOWS, RunConfig
from stresslab.risk.simulation import Portfolio, portfolio_a


def test_ewma_recursion_matches_direct_sum(rng) -> None:
    r = rng.normal(0, 0.01, size=300)
    lam = 0.94
    path = ewma_variance_path(r, lam)
    direct = (1 - lam) * sum(lam ** (len(r) - 1 - i) * r[i] ** 2 for i in range(len(r)))
    assert path[-1] == pytest.approx(direct, rel=1e-12)
    assert path[0] == pytest.approx((1 - lam) * r[0] ** 2)


def test_ewma_normal_tail(rng) -> None:
    r = rng.normal(0, 0.01, size=500)
    result = ewma_var(r, horizon=63)
    sigma_h = result.params["sigma_daily"] * np.sqrt(63)
    assert result.var95 == pytest.approx(norm.ppf(0.95) * sigma_h)
    assert result.cvar95 / result.var95 == pytest.approx(1.2540, abs=1e-4)
    with pytest.raises(ValueError):
        ewma_var(r, lam=1.0)
    with pytest.raises(InsufficientDataError):
        ewma_var(r[:1])


def test_garch_variance_path_matches_loop(rng) -> None:
    r = rng.normal(size=50)
    params = np.array([0.05, 0.1, 0.85])
    h = [1.3]
    for x in r:
        h.append(params[0] + params[1] * x * x + params[2] * h[-1])
    np.testing.assert_allclose(variance_path(params, r, 1.3), h, rtol=1e-12)


def test_garch_refuses_short_or_flat_series(rng) -> None:
    with pytest.raises(InsufficientDataError, match="250"):
        fit_garch_t(rng.normal(size=249))
    with pytest.raises(InsufficientDataError):
        fit_garch_t(np.zeros(300))


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_garch_recovers_persistence(seed) -> None:
    truth = GarchFit(omega=0.05, alpha=0.10, beta=0.85, nu=6.0, loglik=0.0, mean=0.0, h_next=1.0, n_obs=0,
                     starts_converged=0)
    r = simulate_garch_t(truth, horizon=5000, n_paths=1, seed=seed)[0]
    fit = fit_garch_t(r)
    assert abs(fit.alpha + fit.beta - 0.95) <= 0.05
    assert fit.alpha + fit.beta < 1.0
    assert fit.nu > 2.0 and fit.starts_converged >= 1


@pytest.mark.slow
def test_garch_var_is_reproducible() -> None:
    truth = GarchFit(2e-6, 0.08, 0.9, 7.0, 0.0, 0.0003, 1e-4, 0, 0)
    fit = fit_garch_t(simulate_garch_t(truth, 2000, 1, seed=9)[0])
    first = garch_var(fit, horizon=63, n_paths=2000, seed=3)
    second = garch_var(fit, horizon=63, n_paths=2000, seed=3)
    assert (first.var95, first.cvar95) == (second.var95, second.cvar95)
    assert first.cvar95 >= first.var95
    assert first.params["nu"] == fit.nu


def test_portfolio_returns_are_weighted_simple_returns(log_rets) -> None:
    series = portfolio_returns(log_rets, portfolio_a(), ("2015-01-01", "2015-12-31"))
    day = series.index[5]
    expected = 0.6 * np.expm1(log_rets.loc[day, "SPY"]) + 0.3 * np.expm1(log_rets.loc[day, "IEF"]) \
        + 0.1 * np.expm1(log_rets.loc[day, "GLD"])
    assert series.loc[day] == pytest.approx(expected)
    assert series.index.min() >= pd.Timestamp("2015-01-01")
    with pytest.raises(MissingArtifactError):
        portfolio_returns(log_rets, Portfolio("Z", {"QQQ": 1.0}))


def test_block_bootstrap_on_constant_returns() -> None:
    r = np.full(200, 0.001)
    loss = -(1.001**63 - 1)
    np.testing.assert_allclose(block_losses(r, 63), loss)
    result = bootstrap_var(r, 63, n_resamples=500, seed=1)
    assert result.var95 == pytest.approx(loss)
    assert result.cvar95 == pytest.approx(loss)
    assert result.params["blocks"] == 200 - 63 + 1
    with pytest.raises(InsufficientDataError):
        bootstrap_var(r[:63], 63)


def test_bootstrap_is_seeded(rng) -> None:
    r = rng.normal(0, 0.01, size=1000)
    assert bootstrap_var(r, 63, 2000, seed=7) == bootstrap_var(r, 63, 2000, seed=7)
    assert bootstrap_var(r, 63, 2000, seed=7).var95 != bootstrap_var(r, 63, 2000, seed=8).var95


def test_historical_baselines_round_trip_through_csv(tmp_path: Path, log_rets, portfolios) -> None:
    results = historical_baselines(log_rets, portfolios, DEFAULT_WINDOWS, 63, 2000, seed=42)
    assert set(results) == {UNCONDITIONAL_ID, CALM_ID}
    flat = [r for per in results.values() for r in per.values()]
    path = tmp_path / "baselines.csv"
    baseline_table(flat).to_csv(path, index=False)

    loaded = load_baseline_results(path)
    assert loaded[CALM_ID]["B"].var95 == pytest.approx(results[CALM_ID]["B"].var95)
    assert loaded[CALM_ID]["B"].window == DEFAULT_WINDOWS["calm"]
    metrics = load_baseline_metrics(path, UNCONDITIONAL_ID)
    assert set(metrics) == {"A", "B"}
    assert metrics["A"].cvar95 >= metrics["A"].var95 > 0
    with pytest.raises(MissingArtifactError):
        load_baseline_metrics(path, "calm_1990_1999")
    with pytest.raises(MissingArtifactError):
        load_baseline_results(tmp_path / "absent.csv")


def test_reported_episode_multiples(fixtures_dir: Path) -> None:
    envelopes = {(e.episode, e.baseline_id): e for e in load_episode_metrics(fixtures_dir / "episode_metrics.json")}
    assert len(envelopes) == 4
    gfc = envelopes[("gfc", CALM_ID)]
    assert gfc.var_mult == pytest.approx(6.00, abs=0.005)
    assert gfc.cvar_mult == pytest.approx(4.449, abs=0.005)
    covid = envelopes[("covid", CALM_ID)]
    assert covid.var_mult == pytest.approx(1.710, abs=0.005)
    assert covid.cvar_mult == pytest.approx(1.120, abs=0.005)
    assert {e.variant for e in envelopes.values()} == {"reported"}
    assert {e.portfolio_id for e in envelopes.values()} == {"A"}


def test_envelope_rejects_degenerate_baseline() -> None:
    with pytest.raises(NumericalError):
        envelope_from_metrics("gfc", 0.1, 0.12, 0.0, 0.05, "x")
    with pytest.raises(NumericalError):
        envelope_from_metrics("gfc", -0.01, 0.12, 0.05, 0.05, "x")


def test_crisis_envelopes_from_history(log_rets, portfolios) -> None:
    baselines = historical_baselines(log_rets, portfolios, DEFAULT_WINDOWS, 63, 2000, seed=42)
    envelopes = crisis_envelopes(log_rets, portfolios, DEFAULT_WINDOWS, baselines)
    assert len(envelopes) == 2 * 2 * 2 * 2
    table = envelope_table(envelopes)
    primary = table[table["primary"] == 1]
    assert (primary["variant"] == "max_block").all()
    assert (primary["var95"] == primary["cvar95"]).all()
    quantile = table[table["variant"] == "quantile"]
    assert (quantile["cvar95"] >= quantile["var95"]).all()
    row = envelopes[0]
    base = baselines[row.baseline_id][row.portfolio_id]
    assert row.var_mult == pytest.approx(row.var95 / base.var95)


def test_episode_outside_history_is_rejected(log_rets) -> None:
    series = portfolio_returns(log_rets, portfolio_a())
    with pytest.raises(InsufficientDataError):
        episode_metrics(series, ("2001-01-01", "2002-12-31"))


def test_benchmarks_cover_every_country_and_pass_the_gate(weo) -> None:
    cfg = RunConfig()
    scenarios = deterministic_benchmarks(weo, cfg)
    assert len(scenarios) == 2 * 7
    assert {s.model for s in scenarios} == {BENCHMARK_MODEL}
    for s in scenarios:
        shock = derive_shock(s, weo[s.country], cfg.rates_are_levels, cfg.growth_inflation_are_levels)
        assert shock.gdp_growth in (-3.0, -5.0)
        assert hard_gate(shock, s.rationale, weo[s.country])[0]
    assert deterministic_benchmarks(weo, cfg)[0].scenario_hash == scenarios[0].scenario_hash
