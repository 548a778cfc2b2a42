from __future__ import annotations

from dataclasses import replace

import pytest

from stresslab.audit.plausibility import (
    audit_candidates,
    audit_scenario,
    build_lambda,
    derive_shock,
    hard_gate,
    soft_components,
    soft_score,
)
from stresslab.audit.regime import LexicalRegimeClassifier, lexical_regime_fallback, make_regime_classifier, regime_score
from stresslab.core.errors import ConfigError
from stresslab.core.model import MacroShock, RunConfig

PLAIN = "Funding markets seize up and credit tightens across the economy."
OVERRIDE = "The central bank hikes to protect its credibility while the currency slides."

# (label, shock in pp, rationale, expected violations); baseline is Canada 1.4 / 2.0 / 2.75
HARD_GATE_CASES = [
    ("gdp beyond ten points", MacroShock(-10.5, 1.0, 0.0), PLAIN, ["gdp_abs>10"]),
    ("gdp exactly ten points", MacroShock(-10.0, 1.0, 0.0), PLAIN, []),
    ("inflation level above twenty", MacroShock(-1.0, 18.5, 3.0), PLAIN, ["inflation>20"]),
    ("inflation level exactly twenty", MacroShock(-1.0, 18.0, 3.0), PLAIN, []),
    ("rate level above fifteen", MacroShock(-1.0, 2.0, 12.5), PLAIN, ["rate>15"]),
    ("rate level below minus one", MacroShock(-3.0, -0.5, -4.0), PLAIN, ["rate<-1"]),
    ("contradiction without override", MacroShock(-2.5, -0.5, 1.0), PLAIN, ["contradiction"]),
    ("contradiction with override keyword", MacroShock(-2.5, -0.5, 1.0), OVERRIDE, []),
    ("contradiction at the gdp boundary", MacroShock(-2.0, -0.1, 0.5), PLAIN, ["contradiction"]),
    ("no contradiction above the boundary", MacroShock(-1.9, -0.1, 0.5), PLAIN, []),
    ("every level rule at once", MacroShock(-11.0, 19.0, 13.0), PLAIN, ["gdp_abs>10", "inflation>20", "rate>15"]),
]


@pytest.mark.parametrize("label,shock,rationale,expected", HARD_GATE_CASES, ids=[c[0] for c in HARD_GATE_CASES])
def test_hard_gate_cases(weo, label, shock, rationale, expected) -> None:
    passed, violations = hard_gate(shock, rationale, weo["Canada"])
    assert violations == expected
    assert passed is (not expected)


def test_exemplar_scenario_passes_the_audit(weo, exemplar_scenario) -> None:
    cfg = RunConfig()
    result, annotated = audit_scenario(exemplar_scenario, weo["Canada"], LexicalRegimeClassifier(), cfg)
    assert result.shock.gdp_growth == -0.8
    assert result.shock.inflation == 1.6
    assert result.shock.interest_rate == pytest.approx(3.0)
    assert result.hard_pass and result.accepted
    assert result.soft_score >= cfg.accept_threshold
    assert result.soft_score == pytest.approx(3.0, abs=0.5)
    assert annotated.plausibility_ok == 1
    assert annotated.lambda_ == result.lambda_
    assert annotated.scenario_hash != exemplar_scenario.scenario_hash


def test_hard_gate_without_baseline_reads_levels() -> None:
    assert hard_gate(MacroShock(-1.0, 21.0, 2.0), PLAIN) == (False, ["inflation>20"])
    assert hard_gate(MacroShock(-1.0, 2.0, -1.5), PLAIN) == (False, ["rate<-1"])


def test_derive_shock_respects_level_flags(weo, exemplar_scenario) -> None:
    canada = weo["Canada"]
    levels = derive_shock(exemplar_scenario, canada, rates_are_levels=True, growth_inflation_are_levels=True)
    assert levels.gdp_growth == pytest.approx(-0.8 - 1.4)
    assert levels.inflation == pytest.approx(1.6 - 2.0)
    shocks = derive_shock(exemplar_scenario, canada, rates_are_levels=False)
    assert shocks.interest_rate == 5.75
    with pytest.raises(ValueError):
        derive_shock(exemplar_scenario, weo["Japan"])


def test_soft_score_is_bounded_and_weighted() -> None:
    shock = MacroShock(-3.0, 2.0, 2.5)
    parts = soft_components(shock, "word " * 150, ["a", "b", "c", "d"])
    assert all(0.0 <= v <= 5.0 for v in parts.values())
    assert parts["structure"] == pytest.approx(5.0)
    expected = 0.4 * parts["magnitude"] + 0.4 * parts["coherence"] + 0.2 * parts["structure"]
    assert soft_score(shock, "word " * 150, ["a", "b", "c", "d"]) == pytest.approx(expected)


def test_contradiction_lowers_coherence() -> None:
    clean = soft_components(MacroShock(-2.5, 0.5, 0.5), PLAIN, [])
    contradictory = soft_components(MacroShock(-2.5, -0.5, 0.5), PLAIN, [])
    assert contradictory["coherence"] < clean["coherence"]


def test_lambda_mixes_norm_and_regime() -> None:
    assert build_lambda(MacroShock(0.0, 0.0, 0.0), 0.0) == 0.0
    assert build_lambda(MacroShock(-6.0, 8.0, 0.0), 1.0) == 1.0
    assert build_lambda(MacroShock(-3.0, 4.0, 0.0), 0.2, theta=10.0) == pytest.approx(0.5 * 0.5 + 0.5 * 0.2)


def test_lexical_regime_probabilities() -> None:
    probs, score = lexical_regime_fallback("")
    assert probs == pytest.approx((0.6, 0.25, 0.15))
    assert score == pytest.approx(0.5 * 0.25 + 0.15)
    crisis_probs, crisis_score = lexical_regime_fallback("systemic crisis, contagion and panic trigger a default")
    assert sum(crisis_probs) == pytest.approx(1.0)
    assert max(range(3), key=lambda i: crisis_probs[i]) == 2
    assert crisis_score > score
    assert regime_score((0.0, 0.0, 1.0)) == 1.0


def test_unknown_regime_classifier() -> None:
    with pytest.raises(ConfigError):
        make_regime_classifier("oracle")


def test_audit_candidates_splits_accepted(weo, exemplar_scenario) -> None:
    wild = replace(exemplar_scenario, shock=MacroShock(-12.0, 1.0, 5.75)).stamped()
    annotated, accepted, table = audit_candidates([exemplar_scenario, wild], weo, LexicalRegimeClassifier(), RunConfig())
    assert len(annotated) == 2 and len(accepted) == 1
    assert list(table["accepted"]) == [1, 0]
    assert table.loc[1, "hard_violations"] == "gdp_abs>10"
    assert annotated[1].plausibility_ok == 0
