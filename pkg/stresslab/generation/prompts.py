"""
Prompt assembly: system instruction, context block, directive and variant.

prompt_hash covers the country-free instruction text only, so it is shared by
every country for a given variant; ctx_hash covers the context blocks.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from stresslab.ingest_tools.weo import CountryBaseline, build_profile

SYSTEM_TEXT = (
    "You are a senior macro-financial stress-testing economist. You design severe but "
    "plausible macroeconomic scenarios that are internally consistent and grounded in the "
    "country context you are given. You answer with a single JSON object and nothing else."
)

DIRECTIVE_TEXT = (
    "Using the context above, generate a severe but plausible macroeconomic stress scenario "
    "for the target country for Q4 2026. Return one JSON object with exactly these fields:\n"
    '  "country": the target country name,\n'
    '  "title": a short scenario title,\n'
    '  "gdp_growth": change in real GDP growth versus the baseline, in percentage points,\n'
    '  "inflation": change in headline inflation versus the baseline, in percentage points,\n'
    '  "interest_rate": the short-term policy rate level in percent at the scenario peak,\n'
    '  "rationale": a narrative explaining the transmission mechanism (100-200 words),\n'
    '  "risk_sectors": a list of the most exposed sectors.\n'
    "Keep magnitudes realistic for a one-in-twenty-five-year event."
)

# id -> scenario theme
PROMPT_VARIANTS = {
    "v01_baseline_severe": "Design a broad severe downturn without a single dominant trigger.",
    "v02_demand_collapse": "Focus on a collapse in domestic and external demand.",
    "v03_supply_shock": "Focus on an adverse supply shock that lowers output and raises prices.",
    "v04_energy_spike": "Focus on a sharp and persistent energy price spike.",
    "v05_credit_crunch": "Focus on a credit crunch as banks cut lending abruptly.",
    "v06_housing_bust": "Focus on a housing market correction and mortgage stress.",
    "v07_sovereign_stress": "Focus on sovereign debt stress and widening government bond spreads.",
    "v08_currency_crisis": "Focus on a sharp currency depreciation and capital outflows.",
    "v09_trade_war": "Focus on an escalation of tariffs and a global trade war.",
    "v10_contagion": "Focus on financial contagion transmitted from abroad.",
    "v11_pandemic_relapse": "Focus on a renewed pandemic wave with mobility restrictions.",
    "v12_geopolitical": "Focus on a geopolitical conflict disrupting markets and trade.",
    "v13_tech_correction": "Focus on a disorderly correction in technology valuations.",
    "v14_bank_run": "Focus on deposit flight and a run on mid-sized banks.",
    "v15_stagflation": "Focus on stagflation with weak growth and persistent inflation.",
    "v16_policy_error": "Focus on a monetary policy error that tightens conditions too far.",
    "v17_commodity_slump": "Focus on a slump in commodity prices and export receipts.",
    "v18_climate_event": "Focus on a severe physical climate event and its economic fallout.",
    "v19_cyber_attack": "Focus on a systemic cyber attack on payment infrastructure.",
    "v20_supply_chain": "Focus on a global supply-chain breakdown.",
    "v21_labour_shock": "Focus on a labour market shock with rising unemployment.",
    "v22_fiscal_cliff": "Focus on abrupt fiscal consolidation and a fiscal cliff.",
    "v23_em_spillover": "Focus on spillovers from an emerging-market crisis.",
    "v24_liquidity_freeze": "Focus on a freeze in wholesale funding and market liquidity.",
    "v25_inflation_surge": "Focus on an inflation surge that forces aggressive rate hikes.",
    "v26_deflation_trap": "Focus on a deflationary spiral with falling prices and output.",
    "v27_commercial_real_estate": "Focus on a commercial real estate collapse.",
    "v28_shadow_banking": "Focus on distress in non-bank lenders and shadow banking.",
    "v29_confidence_shock": "Focus on a sudden loss of business and consumer confidence.",
    "v30_multi_shock": "Combine at least two simultaneous shocks of your choice.",
}


HEADLINES_HEADER = "Recent headlines for"


@dataclass(frozen=True, slots=True)
class PromptBundle:
    country: str
    baseline: CountryBaseline
    system_text: str
    context_blocks: tuple[str, ...]
    directive_text: str
    prompt_variant: str
    variant_text: str
    prompt_hash: str
    ctx_hash: str
    rag: bool
    use_news: bool

    @property
    def user_text(self) -> str:
        return "\n\n".join([*self.context_blocks, self.directive_text, f"Scenario theme: {self.variant_text}"])

    @property
    def has_headlines(self) -> bool:
        return any(block.startswith(HEADLINES_HEADER) for block in self.context_blocks)


def _digest(parts: Sequence[str]) -> str:
    return hashlib.sha256("\x1e".join(parts).encode("utf-8")).hexdigest()


def variant_text(variant: str) -> str:
    if variant not in PROMPT_VARIANTS:
        raise KeyError(f"unknown prompt variant '{variant}'")
    return PROMPT_VARIANTS[variant]


def build_prompt(
    country: str,
    baseline: CountryBaseline,
    retrieved: Sequence[tuple[str, str]],
    headlines: Sequence[str],
    variant: str,
    rag: bool,
    use_news: bool,
) -> PromptBundle:
    """
    retrieved holds (peer country, profile text) pairs and must be empty when
    rag is off. Headlines appear only when use_news is on and the list is
    non-empty.
    """
    if baseline.country != country:
        raise ValueError(f"baseline is for {baseline.country}, not {country}")
    if retrieved and not rag:
        raise ValueError("retrieved profiles given with rag disabled")

    blocks = [f"Target country profile:\n{build_profile(baseline)}"]
    for peer, profile in retrieved:
        blocks.append(f"Comparable country profile ({peer}):\n{profile}")
    if use_news and headlines:
        blocks.append(f"{HEADLINES_HEADER} {country}:\n" + "\n".join(f"- {h}" for h in headlines))

    theme = variant_text(variant)
    return PromptBundle(
        country=country,
        baseline=baseline,
        system_text=SYSTEM_TEXT,
        context_blocks=tuple(blocks),
        directive_text=DIRECTIVE_TEXT,
        prompt_variant=variant,
        variant_text=theme,
        prompt_hash=_digest([SYSTEM_TEXT, DIRECTIVE_TEXT, variant, theme]),
        ctx_hash=_digest(blocks),
        rag=rag,
        use_news=use_news,
    )
