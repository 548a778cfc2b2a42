"""
Deterministic macro benchmark scenarios. They bypass generation and enter
the same audit and risk path as generated scenarios.
"""
from __future__ import annotations

import logging
from typing import Mapping, Sequence

from stresslab.core.model import MacroShock, RunConfig, Scenario, sha256_hex
from stresslab.generation.grid import timestamp_for
from stresslab.ingest_tools.weo import CountryBaseline

logger = logging.getLogger(__name__)

BENCHMARK_MODEL = "deterministic-benchmark"
BENCHMARK_PROVIDER = "deterministic"

# id -> (d_gdp, d_inflation, d_rate) in pp
BENCHMARK_SHOCKS = {
    "benchmark_1": (-3.0, 1.0, 1.0),
    "benchmark_2": (-5.0, 2.0, 1.5),
}

_RATIONALE = (
    "Fixed benchmark stress for {country}: real GDP growth falls {gdp:.1f} pp below the "
    "{vintage} baseline of {base_gdp:.2f}%, headline inflation rises {infl:.1f} pp as supply "
    "costs pass through, and the policy rate is lifted {rate:.1f} pp from {base_rate:.2f}% to "
    "{level:.2f}% to contain second-round effects. Tighter financial conditions weigh on "
    "credit-sensitive sectors while earnings downgrades pressure equity valuations."
)
_SECTORS = ("Financials", "Real Estate", "Consumer Discretionary", "Industrials")


def benchmark_scenario(benchmark_id: str, baseline: CountryBaseline, cfg: RunConfig) -> Scenario:
    d_gdp, d_infl, d_rate = BENCHMARK_SHOCKS[benchmark_id]
    gdp = baseline.gdp_growth + d_gdp if cfg.growth_inflation_are_levels else d_gdp
    infl = baseline.inflation + d_infl if cfg.growth_inflation_are_levels else d_infl
    rate = baseline.interest_rate + d_rate if cfg.rates_are_levels else d_rate
    rationale = _RATIONALE.format(
        country=baseline.country, gdp=-d_gdp, infl=d_infl, rate=d_rate, vintage=baseline.vintage,
        base_gdp=baseline.gdp_growth, base_rate=baseline.interest_rate,
        level=baseline.interest_rate + d_rate,
    )
    return Scenario(
        country=baseline.country,
        title=f"{baseline.country} deterministic {benchmark_id.replace('_', ' ')}",
        shock=MacroShock(float(gdp), float(infl), float(rate)),
        rationale=rationale,
        risk_sectors=_SECTORS,
        model=BENCHMARK_MODEL,
        model_version="1",
        provider=BENCHMARK_PROVIDER,
        prompt_variant=benchmark_id,
        prompt_hash=sha256_hex(f"{BENCHMARK_PROVIDER}|{benchmark_id}"),
        ctx_hash=sha256_hex(f"{baseline.country}|{baseline.vintage}"),
        seed=cfg.seed,
        timestamp_utc=timestamp_for(cfg.as_of_date),
    ).stamped()


def deterministic_benchmarks(
    baselines: Mapping[str, CountryBaseline],
    cfg: RunConfig,
    countries: Sequence[str] | None = None,
) -> list[Scenario]:
    """Both benchmark shock sets for every country, in country order."""
    countries = list(countries) if countries is not None else list(cfg.countries)
    out = [benchmark_scenario(bid, baselines[c], cfg) for c in countries for bid in BENCHMARK_SHOCKS]
    logger.info(f"stage=baselines event=benchmarks_built countries={len(countries)} scenarios={len(out)}")
    return out
