from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import eigvalsh

from stresslab.core.errors import FactorModelError
from stresslab.core.model import ChannelParams, MacroShock
from stresslab.risk.factors import (
    fit_betas,
    fit_pca,
    linear_drift,
    load_factor_model,
    macro_to_factor,
    nonlinear_drift,
    poly_basis,
    save_factor_model,
)


def test_macro_to_factor_keeps_adverse_directions_only() -> None:
    np.testing.assert_allclose(macro_to_factor(MacroShock(-2.5, 1.0, -0.5)), [0.025, 0.01, 0.0])
    np.testing.assert_allclose(macro_to_factor(MacroShock(1.0, -1.0, 2.0)), [0.0, 0.0, 0.02])


@pytest.mark.parametrize(
    "shock, expected",
    [
        ((-3.0, 1.0, 1.0), [0.03, 0.01, 0.01]),
        ((2.0, -1.0, -0.5), [0.0, 0.0, 0.0]),
        ((-5.0, 2.0, 1.5), [0.05, 0.02, 0.015]),
    ],
)
def test_macro_to_factor_benchmark_shocks(shock, expected) -> None:
    np.testing.assert_array_equal(macro_to_factor(MacroShock(*shock)), expected)


def test_pca_contract_on_random_inputs(rng) -> None:
    for _ in range(50):
        mix = rng.normal(size=(3, 3))
        x = rng.normal(size=(400, 3)) @ mix * 0.01
        pca = fit_pca(x)
        np.testing.assert_allclose(pca.loadings @ pca.loadings.T, np.eye(3), atol=1e-10)
        assert pca.loadings[0, 0] > 0 and pca.loadings[1, 2] > 0 and pca.loadings[2, 1] > 0
        assert np.all(np.diff(pca.eigenvalues) <= 0)
        expected = eigvalsh(np.cov(x, rowvar=False))[::-1]
        np.testing.assert_allclose(pca.eigenvalues, expected, rtol=1e-9)
        np.testing.assert_allclose(pca.factor_std**2, pca.eigenvalues, rtol=1e-9)


def test_pca_rejects_degenerate_input(rng) -> None:
    x = rng.normal(size=(200, 2))
    with pytest.raises(FactorModelError, match="rank-deficient"):
        fit_pca(np.column_stack([x, x[:, 0] + x[:, 1]]))
    with pytest.raises(FactorModelError, match="at least"):
        fit_pca(rng.normal(size=(10, 3)))
    with pytest.raises(FactorModelError, match="T x 3"):
        fit_pca(rng.normal(size=(100, 4)))


def test_linear_betas_recover_planted_exposures(rng) -> None:
    pca = fit_pca(rng.normal(size=(3000, 3)) * 0.01)
    planted = np.array([[0.8, -0.2, 0.1], [0.0, 0.5, -0.3]])
    y = pca.factor_scores @ planted.T + 1e-5 * rng.normal(size=(3000, 2))
    betas = fit_betas(y, pca, ["X", "Y"])
    np.testing.assert_allclose(betas.linear, planted, atol=0.01)
    assert betas.ridge_fallback == (False, False)


def test_sparse_asset_falls_back_to_ridge(rng) -> None:
    pca = fit_pca(rng.normal(size=(300, 3)) * 0.01)
    y = np.full((300, 1), np.nan)
    y[:6, 0] = rng.normal(size=6) * 0.01
    betas = fit_betas(y, pca, ["THIN"])
    assert betas.ridge_fallback == (True,)
    assert np.isfinite(betas.poly).all()


def test_misaligned_betas_input_is_rejected(rng) -> None:
    pca = fit_pca(rng.normal(size=(100, 3)))
    with pytest.raises(FactorModelError, match="not aligned"):
        fit_betas(rng.normal(size=(99, 2)), pca)


def test_linear_drift_decays_geometrically(factor_model) -> None:
    factors, betas = factor_model
    delta_f = macro_to_factor(MacroShock(-3.0, 2.0, 1.5))
    drift = linear_drift(betas, delta_f, factors.factor_std, 63, 0.97)
    assert drift.shape == (len(betas.assets), 63)
    day1 = betas.linear @ (delta_f / factors.factor_std) / 63
    np.testing.assert_allclose(drift[:, 0], day1, rtol=1e-12)
    nonzero = np.abs(drift[:, 0]) > 0
    np.testing.assert_allclose(drift[nonzero, 62] / drift[nonzero, 0], 0.97**62, rtol=1e-12)


def test_zero_shock_gives_zero_drift(factor_model) -> None:
    factors, betas = factor_model
    zero = np.zeros(3)
    assert not linear_drift(betas, zero, factors.factor_std, 63, 0.97).any()
    assert not nonlinear_drift(betas, zero, 1.0, True, True, ChannelParams(), factors.factor_std, 63).any()
    with pytest.raises(ValueError):
        linear_drift(betas, np.array([-0.01, 0.0, 0.0]), factors.factor_std, 63, 0.97)


def test_nonlinear_drift_is_capped_before_amplification(factor_model) -> None:
    factors, betas = factor_model
    huge = replace(betas, poly=np.full_like(betas.poly, 1e6))
    params = ChannelParams()
    delta_f = macro_to_factor(MacroShock(-4.0, 3.0, 2.0))
    drift = nonlinear_drift(huge, delta_f, 1.0, True, True, params, factors.factor_std, 63)
    amp = params.amplification(1.0, True, True)
    assert amp == pytest.approx(1.14)
    np.testing.assert_allclose(drift[:, 0], params.drift_cap_daily * amp)
    assert np.all(np.abs(drift) <= params.drift_cap_daily * amp + 1e-15)
    np.testing.assert_allclose(drift[:, 10] / drift[:, 0], params.drift_decay**10)


def test_nonlinear_drift_uses_polynomial_basis(factor_model) -> None:
    factors, betas = factor_model
    delta_f = macro_to_factor(MacroShock(-1.0, 0.5, 0.25))
    drift = nonlinear_drift(betas, delta_f, 0.0, False, False, ChannelParams(), factors.factor_std, 63)
    raw = betas.poly @ poly_basis(delta_f / factors.factor_std)[0] / 63
    np.testing.assert_allclose(drift[:, 0], np.clip(raw, -0.005, 0.005))


def test_factor_model_file_round_trip(tmp_path: Path, factor_model) -> None:
    factors, betas = factor_model
    loaded_factors, loaded_betas = load_factor_model(save_factor_model(tmp_path / "factors.json", factors, betas))
    np.testing.assert_array_equal(loaded_factors.loadings, factors.loadings)
    np.testing.assert_array_equal(loaded_factors.factor_std, factors.factor_std)
    np.testing.assert_array_equal(loaded_betas.poly, betas.poly)
    assert loaded_betas.assets == betas.assets
    assert loaded_factors.seed == 42
