from __future__ import annotations

import math

import numpy as np
import pytest

from stresslab.core.errors import CholeskyError, InsufficientDataError, NumericalError
from stresslab.core.model import ChannelParams, MacroShock
from stresslab.risk.covariance import CovariancePair, mix_covariance, safe_cholesky, scale_cov_for_vol_channel
from stresslab.risk.simulation import (
    Portfolio,
    TailMetrics,
    horizon_losses,
    multiples,
    path_drawdowns,
    portfolio_a,
    portfolio_b,
    simulate_paths,
    stream_key,
    tail_metrics,
    var_cvar,
)


def _type7(losses: np.ndarray, p: float = 0.95) -> tuple[float, float]:
    x = np.sort(losses)
    h = (len(x) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(x) - 1)
    var = x[lo] + (h - lo) * (x[hi] - x[lo])
    return var, x[x >= var].mean()


def test_mix_endpoints_are_copies(covpair) -> None:
    calm = mix_covariance(covpair, 0.0)
    crisis = mix_covariance(covpair, 1.0)
    np.testing.assert_array_equal(calm, covpair.calm)
    np.testing.assert_array_equal(crisis, covpair.crisis)
    assert calm is not covpair.calm
    calm[0, 0] = -1.0
    assert covpair.calm[0, 0] > 0
    np.testing.assert_allclose(mix_covariance(covpair, 0.25), 0.75 * covpair.calm + 0.25 * covpair.crisis)
    with pytest.raises(ValueError):
        mix_covariance(covpair, 1.5)


def test_covariance_pair_checks_shape_and_symmetry() -> None:
    with pytest.raises(ValueError, match="shape"):
        CovariancePair(("A", "B"), np.eye(3), np.eye(2))
    with pytest.raises(ValueError, match="symmetric"):
        CovariancePair(("A", "B"), np.array([[1.0, 0.5], [0.4, 1.0]]), np.eye(2))


def test_covariance_subset_keeps_order(covpair) -> None:
    sub = covpair.subset(["GLD", "SPY"])
    assert sub.assets == ("GLD", "SPY")
    assert sub.calm[0, 1] == covpair.calm[2, 0]


def test_vol_channel_scales_variance_for_inflation_only() -> None:
    sigma = np.array([[0.0004, 0.0001], [0.0001, 0.0009]])
    params = ChannelParams()
    np.testing.assert_allclose(scale_cov_for_vol_channel(sigma, MacroShock(-1.0, 2.0, 1.0), params), sigma * 2.25)
    np.testing.assert_array_equal(scale_cov_for_vol_channel(sigma, MacroShock(-1.0, -3.0, 1.0), params), sigma)


def test_safe_cholesky_climbs_the_jitter_ladder() -> None:
    pd_sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    lower, eps = safe_cholesky(pd_sigma)
    assert eps == 0.0
    np.testing.assert_allclose(lower @ lower.T, pd_sigma)

    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    lower, eps = safe_cholesky(singular)
    assert 0.0 < eps <= 1e-6
    np.testing.assert_allclose(lower @ lower.T, singular + eps * np.eye(2), atol=1e-12)

    with pytest.raises(CholeskyError):
        safe_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_simulation_is_reproducible_and_block_keyed() -> None:
    sigma = np.array([[1e-4, 2e-5], [2e-5, 4e-5]])
    mu = np.zeros((2, 10))
    weights = {"P": np.array([0.5, 0.5])}
    key = stream_key({"shock": "x", "lambda": 0.5, "channel": "linear"})
    first, _ = simulate_paths(mu, sigma, 2500, 10, 42, 0.2, weights, key, block_paths=1000)
    again, _ = simulate_paths(mu, sigma, 2500, 10, 42, 0.2, weights, key, block_paths=1000)
    np.testing.assert_array_equal(first["P"], again["P"])

    prefix, _ = simulate_paths(mu, sigma, 1000, 10, 42, 0.2, weights, key, block_paths=1000)
    np.testing.assert_array_equal(prefix["P"], first["P"][:1000])

    other, _ = simulate_paths(mu, sigma, 2500, 10, 42, 0.2, weights, stream_key({"channel": "vol"}), block_paths=1000)
    assert not np.array_equal(other["P"], first["P"])
    reseeded, _ = simulate_paths(mu, sigma, 2500, 10, 43, 0.2, weights, key, block_paths=1000)
    assert not np.array_equal(reseeded["P"], first["P"])


def test_returns_are_clipped() -> None:
    mu = np.full((2, 5), 0.5)
    paths, _ = simulate_paths(mu, np.zeros((2, 2)), 30, 5, 1, 0.2, {"P": np.array([0.3, 0.7])})
    np.testing.assert_allclose(paths["P"], 0.2)


def test_weights_drift_with_holdings() -> None:
    mu = np.vstack([np.full(3, 0.1), np.zeros(3)])
    paths, _ = simulate_paths(mu, np.zeros((2, 2)), 25, 3, 1, 0.2, {"P": np.array([0.5, 0.5])})
    np.testing.assert_allclose(paths["P"][:, 0], 0.05)
    np.testing.assert_allclose(paths["P"][:, 1], 0.1 * 0.55 / 1.05)


def test_simulation_rejects_mismatched_shapes() -> None:
    with pytest.raises(NumericalError, match="drift shape"):
        simulate_paths(np.zeros((2, 4)), np.eye(2), 10, 5, 1, 0.2, {"P": np.array([0.5, 0.5])})
    with pytest.raises(NumericalError, match="weights"):
        simulate_paths(np.zeros((2, 5)), np.eye(2), 10, 5, 1, 0.2, {"P": np.array([1.0])})


def test_losses_and_drawdowns_on_a_known_path() -> None:
    path = np.array([[0.1, -0.5, 0.2]])
    assert horizon_losses(path)[0] == pytest.approx(0.34)
    assert path_drawdowns(path)[0] == pytest.approx(-0.5)
    assert path_drawdowns(np.array([[0.01, 0.02]]))[0] == 0.0


def test_var_cvar_matches_sorted_quantile(rng) -> None:
    for _ in range(200):
        losses = rng.standard_t(4, size=int(rng.integers(20, 500))) * 0.02
        var, cvar = var_cvar(losses)
        expected_var, expected_cvar = _type7(losses)
        assert var == pytest.approx(expected_var, rel=1e-12, abs=1e-14)
        assert cvar == pytest.approx(expected_cvar, rel=1e-12, abs=1e-14)


def test_cvar_never_below_var(rng) -> None:
    for _ in range(10_000):
        n = int(rng.integers(1, 60))
        losses = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        var, cvar = var_cvar(losses)
        assert cvar >= var


def test_tail_metrics_need_twenty_paths(rng) -> None:
    with pytest.raises(InsufficientDataError):
        tail_metrics(rng.normal(0, 0.01, size=(19, 10)))
    m = tail_metrics(rng.normal(0, 0.01, size=(20, 10)), channel="linear")
    assert m.n_paths == 20 and m.channel == "linear"
    assert m.cvar95 >= m.var95
    assert m.mdd_q95 <= m.mdd <= 0.0


def test_multiples_against_baseline() -> None:
    base = TailMetrics(0.0491, 0.0932, -0.04)
    out = multiples(TailMetrics(0.0716, 0.1100, -0.05), base)
    assert round(out.var_mult, 3) == 1.458
    assert out.dvar_pct == pytest.approx(100 * (0.0716 - 0.0491) / 0.0491)
    assert out.cvar_mult == pytest.approx(0.1100 / 0.0932)
    with pytest.raises(NumericalError):
        multiples(base, TailMetrics(0.0, 0.01, 0.0))


def test_portfolios() -> None:
    a = portfolio_a()
    np.testing.assert_array_equal(a.vector(["GLD", "IEF", "SPY", "XLF"]), [0.1, 0.3, 0.6, 0.0])
    b = portfolio_b(["XLF", "XLK", "XLE"])
    assert sum(b.weights.values()) == 1.0
    with pytest.raises(ValueError):
        Portfolio("bad", {"SPY": 1.2, "IEF": -0.2})
    with pytest.raises(ValueError, match="outside the universe"):
        a.vector(["SPY", "IEF"])
