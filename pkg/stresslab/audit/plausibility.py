"""
Plausibility audit: shock derivation, hard gate, soft score and severity lambda.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from stresslab.audit.regime import RegimeClassifier
from stresslab.core.model import REGIME_LABELS, MacroShock, RunConfig, Scenario
from stresslab.ingest_tools.weo import CountryBaseline

logger = logging.getLogger(__name__)

GDP_ABS_MAX = 10.0
INFLATION_MAX = 20.0
RATE_MAX = 15.0
RATE_MIN = -1.0

OVERRIDE_KEYWORDS = ("currency defence", "defend the currency", "credibility", "anchoring", "imported")

SOFT_WEIGHTS = (0.4, 0.4, 0.2)
# plausible band for the shock norm, in percentage points
MAGNITUDE_BAND = (5.0, 7.0)
MAGNITUDE_WIDTH = 1.5
COHERENCE_TOLERANCE = 3.0
CONTRADICTION_PENALTY = 2.5
STRUCTURE_WORDS = 100
STRUCTURE_SECTORS = 4


@dataclass(frozen=True, slots=True)
class AuditResult:
    shock: MacroShock
    hard_pass: bool
    hard_violations: tuple[str, ...]
    soft_score: float
    accepted: bool
    lambda_: float
    regime_label: str
    regime_score: float
    regime_probs: tuple[float, float, float]


def derive_shock(
    s: Scenario,
    baseline: CountryBaseline,
    rates_are_levels: bool = True,
    growth_inflation_are_levels: bool = False,
) -> MacroShock:
    """Shocks in pp relative to the WEO baseline; fields already in shock units pass through."""
    if baseline.country != s.country:
        raise ValueError(f"baseline country {baseline.country} does not match scenario country {s.country}")
    d_gdp = s.shock.gdp_growth - baseline.gdp_growth if growth_inflation_are_levels else s.shock.gdp_growth
    d_infl = s.shock.inflation - baseline.inflation if growth_inflation_are_levels else s.shock.inflation
    d_rate = s.shock.interest_rate - baseline.interest_rate if rates_are_levels else s.shock.interest_rate
    return MacroShock(float(d_gdp), float(d_infl), float(d_rate))


def is_contradictory(shock: MacroShock) -> bool:
    return shock.gdp_growth <= -2.0 and shock.inflation < 0.0 and shock.interest_rate > 0.0


def has_override(rationale: str) -> bool:
    text = (rationale or "").lower()
    return any(keyword in text for keyword in OVERRIDE_KEYWORDS)


def hard_gate(shock: MacroShock, rationale: str, baseline: CountryBaseline | None = None) -> tuple[bool, list[str]]:
    """
    Level thresholds apply to implied levels (baseline + shock). Without a
    baseline the inflation and rate values are read as levels.
    """
    infl_level = shock.inflation + (baseline.inflation if baseline else 0.0)
    rate_level = shock.interest_rate + (baseline.interest_rate if baseline else 0.0)

    violations = set()
    if abs(shock.gdp_growth) > GDP_ABS_MAX:
        violations.add("gdp_abs>10")
    if infl_level > INFLATION_MAX:
        violations.add("inflation>20")
    if rate_level > RATE_MAX:
        violations.add("rate>15")
    if rate_level < RATE_MIN:
        violations.add("rate<-1")
    if is_contradictory(shock) and not has_override(rationale):
        violations.add("contradiction")
    ordered = sorted(violations)
    return not ordered, ordered


def soft_components(shock: MacroShock, rationale: str, sectors: Sequence[str]) -> dict[str, float]:
    norm = shock.norm()
    lo, hi = MAGNITUDE_BAND
    dist = max(0.0, lo - norm, norm - hi)
    magnitude = 5.0 * math.exp(-((dist / MAGNITUDE_WIDTH) ** 2))

    # Taylor-style reaction: rates should move with inflation and growth
    expected_rate = 1.5 * shock.inflation + 0.5 * shock.gdp_growth
    coherence = 5.0 * max(0.0, 1.0 - abs(shock.interest_rate - expected_rate) / COHERENCE_TOLERANCE)
    if is_contradictory(shock):
        coherence -= CONTRADICTION_PENALTY
    coherence = min(5.0, max(0.0, coherence))

    words = len((rationale or "").split())
    n_sectors = len([s for s in sectors if str(s).strip()])
    structure = 2.5 * min(1.0, words / STRUCTURE_WORDS) + 2.5 * min(1.0, n_sectors / STRUCTURE_SECTORS)
    return {"magnitude": magnitude, "coherence": coherence, "structure": structure}


def soft_score(shock: MacroShock, rationale: str, sectors: Sequence[str]) -> float:
    parts = soft_components(shock, rationale, sectors)
    w_mag, w_coh, w_str = SOFT_WEIGHTS
    score = w_mag * parts["magnitude"] + w_coh * parts["coherence"] + w_str * parts["structure"]
    return float(min(5.0, max(0.0, score)))


def build_lambda(shock: MacroShock, regime_score: float, theta: float = 8.0) -> float:
    value = 0.5 * min(1.0, shock.norm() / theta) + 0.5 * regime_score
    return float(min(1.0, max(0.0, value)))


def audit_scenario(
    s: Scenario,
    baseline: CountryBaseline,
    classifier: RegimeClassifier,
    cfg: RunConfig,
) -> tuple[AuditResult, Scenario]:
    """Run every audit step and return the result plus the annotated, re-stamped scenario."""
    shock = derive_shock(s, baseline, cfg.rates_are_levels, cfg.growth_inflation_are_levels)
    hard_pass, violations = hard_gate(shock, s.rationale, baseline)
    probs, r_score = classifier.classify(s.rationale)
    score = soft_score(shock, s.rationale, s.risk_sectors)
    lam = build_lambda(shock, r_score, cfg.lambda_theta)
    accepted = hard_pass and score >= cfg.accept_threshold
    label = REGIME_LABELS[int(np.argmax(probs))]

    result = AuditResult(shock, hard_pass, tuple(violations), score, accepted, lam, label, r_score, tuple(probs))
    annotated = replace(
        s,
        plausibility_ok=int(accepted),
        plausibility_score=score,
        regime_label=label,
        regime_score=r_score,
        regime_probs=tuple(probs),
        lambda_=lam,
    ).stamped()
    return result, annotated


def audit_candidates(
    candidates: Sequence[Scenario],
    baselines: Mapping[str, CountryBaseline],
    classifier: RegimeClassifier,
    cfg: RunConfig,
    run_id: str = "",
) -> tuple[list[Scenario], list[Scenario], pd.DataFrame]:
    """Returns (annotated, accepted, audit table)."""
    annotated, accepted, rows = [], [], []
    for s in candidates:
        result, scored = audit_scenario(s, baselines[s.country], classifier, cfg)
        annotated.append(scored)
        if result.accepted:
            accepted.append(scored)
        else:
            logger.debug(
                f"run_id={run_id} stage=audit event=scenario_rejected country={s.country} "
                f"variant={s.prompt_variant} violations={list(result.hard_violations)} soft={result.soft_score:.3f}"
            )
        rows.append({
            "scenario_hash": scored.scenario_hash,
            "country": s.country,
            "rag": s.rag,
            "use_news": s.use_news,
            "prompt_variant": s.prompt_variant,
            "model": s.model,
            "d_gdp": result.shock.gdp_growth,
            "d_inflation": result.shock.inflation,
            "d_rate": result.shock.interest_rate,
            "hard_pass": int(result.hard_pass),
            "hard_violations": "|".join(result.hard_violations),
            "soft_score": result.soft_score,
            "accepted": int(result.accepted),
            "regime_label": result.regime_label,
            "regime_score": result.regime_score,
            "lambda": result.lambda_,
        })
    table = pd.DataFrame(rows, columns=[
        "scenario_hash", "country", "rag", "use_news", "prompt_variant", "model", "d_gdp", "d_inflation",
        "d_rate", "hard_pass", "hard_violations", "soft_score", "accepted", "regime_label", "regime_score", "lambda",
    ])
    logger.info(
        f"run_id={run_id} stage=audit event=audit_completed candidates={len(candidates)} accepted={len(accepted)}"
    )
    return annotated, accepted, table
