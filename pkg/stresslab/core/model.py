"""
Shared domain types, the scenario record schema and run configuration.

Scenarios are write-once records. Units are percentage points throughout;
interest_rate holds whatever the generator emitted (a level in the default
schema) and is turned into a shock only by audit.plausibility.derive_shock.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from stresslab.core.errors import ConfigError, SerializationError

logger = logging.getLogger(__name__)

REGIME_LABELS = ("normal", "stress", "crisis")
CHANNELS = ("vol", "linear", "nonlinear")

# Probabilities from upstream classifiers arrive rounded to ~1e-8
REGIME_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True, slots=True)
class MacroShock:
    gdp_growth: float
    inflation: float
    interest_rate: float

    def __post_init__(self):
        for name in ("gdp_growth", "inflation", "interest_rate"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"MacroShock.{name} must be finite, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.gdp_growth, self.inflation, self.interest_rate], dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True, slots=True)
class Scenario:
    country: str
    title: str
    shock: MacroShock
    rationale: str
    risk_sectors: tuple[str, ...]
    rag: bool = False
    use_news: bool = False
    model: str = ""
    model_version: str = ""
    provider: str = ""
    prompt_variant: str = ""
    prompt_hash: str = ""
    ctx_hash: str = ""
    seed: int = 0
    timestamp_utc: int = 0
    scenario_hash: str = ""
    plausibility_ok: int = 0
    plausibility_score: float = 0.0
    regime_label: str = "normal"
    regime_score: float = 0.0
    regime_probs: tuple[float, float, float] = (1.0, 0.0, 0.0)
    lambda_: float = 0.0

    def stamped(self) -> "Scenario":
        """Copy with scenario_hash recomputed from the canonical form."""
        return replace(self, scenario_hash=scenario_digest(self))

    def to_record(self, include_hash: bool = True) -> dict[str, Any]:
        """Published JSON object (regime keys carry the _text suffix)."""
        record = {
            "country": self.country,
            "title": self.title,
            "gdp_growth": self.shock.gdp_growth,
            "inflation": self.shock.inflation,
            "interest_rate": self.shock.interest_rate,
            "rationale": self.rationale,
            "risk_sectors": list(self.risk_sectors),
            "rag": self.rag,
            "use_news": self.use_news,
            "model": self.model,
            "model_version": self.model_version,
            "provider": self.provider,
            "prompt_variant": self.prompt_variant,
            "prompt_hash": self.prompt_hash,
            "ctx_hash": self.ctx_hash,
            "seed": self.seed,
            "timestamp_utc": self.timestamp_utc,
            "plausibility_ok": self.plausibility_ok,
            "plausibility_score": self.plausibility_score,
            "regime_label_text": self.regime_label,
            "regime_score_text": self.regime_score,
            "regime_p_normal": self.regime_probs[0],
            "regime_p_stress": self.regime_probs[1],
            "regime_p_crisis": self.regime_probs[2],
            "lambda": self.lambda_,
        }
        if include_hash:
            record["scenario_hash"] = self.scenario_hash
        return record


@dataclass(frozen=True, slots=True)
class Violation:
    field: str
    kind: str  # missing | type | range | consistency
    detail: str = ""

    def __str__(self):
        suffix = f": {self.detail}" if self.detail else ""
        return f"{self.kind}:{self.field}{suffix}"


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def _encode(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise SerializationError(f"non-finite number in canonical form: {value!r}")
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if value is None:
        return "null"
    if isinstance(value, Mapping):
        items = sorted(value.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(str(k), ensure_ascii=False)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    raise SerializationError(f"unsupported type in canonical form: {type(value).__name__}")


def canonical_bytes(obj: Any) -> bytes:
    """Sorted keys, 17 significant digits, no whitespace, UTF-8."""
    return _encode(obj).encode("utf-8")


def canonical_serialize(s: Scenario) -> bytes:
    return canonical_bytes(s.to_record(include_hash=False))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def scenario_digest(s: Scenario) -> str:
    return sha256_hex(canonical_serialize(s))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

REQUIRED_FIELDS = ("country", "title", "gdp_growth", "inflation", "interest_rate", "rationale", "risk_sectors")

_STRING_FIELDS = ("model", "model_version", "provider", "prompt_variant", "prompt_hash", "ctx_hash")
_FLAG_FIELDS = ("rag", "use_news")

# accepted spellings, published form first
_REGIME_ALIASES = {
    "regime_label": ("regime_label_text", "regime_label"),
    "regime_score": ("regime_score_text", "regime_score"),
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _pick(raw: Mapping[str, Any], names: Sequence[str]):
    for name in names:
        if name in raw:
            return name, raw[name]
    return None, None


def validate_scenario(raw: Any) -> Scenario | list[Violation]:
    """
    Type-check a parsed JSON object against the scenario schema.

    Returns a stamped Scenario, or every violation found. Never raises.
    """
    if not isinstance(raw, Mapping):
        return [Violation("<root>", "type", f"expected object, got {type(raw).__name__}")]

    violations: list[Violation] = []

    for name in REQUIRED_FIELDS:
        if name not in raw:
            violations.append(Violation(name, "missing"))

    def number(name, default=None, lo=None, hi=None):
        if name not in raw:
            return default
        value = raw[name]
        if not _is_number(value):
            violations.append(Violation(name, "type", f"expected number, got {type(value).__name__}"))
            return default
        value = float(value)
        if not math.isfinite(value):
            violations.append(Violation(name, "range", "non-finite"))
            return default
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            violations.append(Violation(name, "range", f"{value} outside [{lo}, {hi}]"))
            return default
        return value

    def integer(name, default=0, lo=None):
        if name not in raw:
            return default
        value = raw[name]
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            violations.append(Violation(name, "type", f"expected integer, got {type(value).__name__}"))
            return default
        if lo is not None and value < lo:
            violations.append(Violation(name, "range", f"{value} < {lo}"))
            return default
        return value

    def text(name, default=""):
        if name not in raw:
            return default
        value = raw[name]
        if not isinstance(value, str):
            violations.append(Violation(name, "type", f"expected string, got {type(value).__name__}"))
            return default
        return value

    def flag(name):
        if name not in raw:
            return False
        value = raw[name]
        if not isinstance(value, bool):
            violations.append(Violation(name, "type", f"expected boolean, got {type(value).__name__}"))
            return False
        return value

    country = text("country")
    if "country" in raw and isinstance(raw["country"], str) and not country.strip():
        violations.append(Violation("country", "range", "empty"))
    title = text("title")
    rationale = text("rationale")
    gdp = number("gdp_growth", 0.0)
    infl = number("inflation", 0.0)
    rate = number("interest_rate", 0.0)

    sectors: tuple[str, ...] = ()
    if "risk_sectors" in raw:
        value = raw["risk_sectors"]
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            violations.append(Violation("risk_sectors", "type", "expected list of strings"))
        else:
            sectors = tuple(value)

    strings = {name: text(name) for name in _STRING_FIELDS}
    flags = {name: flag(name) for name in _FLAG_FIELDS}
    seed = integer("seed", 0)
    timestamp = integer("timestamp_utc", 0, lo=0)

    plaus_ok = integer("plausibility_ok", 0)
    if plaus_ok not in (0, 1):
        violations.append(Violation("plausibility_ok", "range", f"{plaus_ok} not in {{0, 1}}"))
        plaus_ok = 0
    plaus_score = number("plausibility_score", 0.0, 0.0, 5.0)
    lam = number("lambda", 0.0, 0.0, 1.0)

    label_key, label = _pick(raw, _REGIME_ALIASES["regime_label"])
    if label_key is not None and label not in REGIME_LABELS:
        violations.append(Violation(label_key, "range", f"{label!r} not in {REGIME_LABELS}"))
        label = None
    score_key, _ = _pick(raw, _REGIME_ALIASES["regime_score"])
    regime_score = number(score_key, 0.0, 0.0, 1.0) if score_key else 0.0

    prob_keys = [f"regime_p_{name}" for name in REGIME_LABELS]
    present = [k for k in prob_keys if k in raw]
    probs = None
    if present:
        if len(present) != 3:
            for k in prob_keys:
                if k not in raw:
                    violations.append(Violation(k, "missing", "partial regime probabilities"))
        else:
            values = [number(k, None, 0.0, 1.0) for k in prob_keys]
            if all(v is not None for v in values):
                total = sum(values)
                if abs(total - 1.0) > REGIME_SUM_TOLERANCE:
                    violations.append(Violation("regime_probs", "range", f"sum {total} != 1"))
                else:
                    if abs(total - 1.0) > 1e-12:
                        values = [v / total for v in values]
                    probs = tuple(values)

    if probs is None and not present:
        probs = tuple(1.0 if name == (label or "normal") else 0.0 for name in REGIME_LABELS)
    if probs is not None:
        argmax = REGIME_LABELS[int(np.argmax(probs))]
        if label is None and label_key is None:
            label = argmax
        elif label is not None and label != argmax:
            violations.append(Violation("regime_label", "consistency", f"{label} is not argmax ({argmax})"))

    if violations:
        return violations

    scenario = Scenario(
        country=country,
        title=title,
        shock=MacroShock(gdp, infl, rate),
        rationale=rationale,
        risk_sectors=sectors,
        rag=flags["rag"],
        use_news=flags["use_news"],
        seed=seed,
        timestamp_utc=timestamp,
        plausibility_ok=plaus_ok,
        plausibility_score=plaus_score,
        regime_label=label,
        regime_score=regime_score,
        regime_probs=probs,
        lambda_=lam,
        **strings,
    )
    return scenario.stamped()


def parse_scenario(raw: Any) -> Scenario:
    """validate_scenario for trusted inputs; raises on violations."""
    result = validate_scenario(raw)
    if isinstance(result, list):
        raise SerializationError("invalid scenario record: " + "; ".join(str(v) for v in result))
    return result


def write_scenarios(path: str | Path, scenarios: Iterable[Scenario]) -> int:
    """One canonical record per line. Returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "wb") as f:
        for s in scenarios:
            f.write(canonical_bytes(s.to_record()) + b"\n")
            count += 1
    return count


def read_scenarios(path: str | Path) -> list[Scenario]:
    scenarios = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise SerializationError(f"{path}: invalid JSON at line {number} ({e})")
            scenarios.append(parse_scenario(record))
    return scenarios


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

DEFAULT_WINDOWS = {
    "pca": ("2015-01-01", "2025-09-30"),
    "calm": ("2012-01-01", "2019-12-31"),
    "gfc": ("2008-01-01", "2009-12-31"),
    "covid": ("2020-01-01", "2020-12-31"),
    "unconditional": ("2000-01-01", "2025-09-30"),
}

CRISIS_EPISODES = ("gfc", "covid")

G7 = ("Canada", "France", "Germany", "Italy", "Japan", "United Kingdom", "United States")


@dataclass(frozen=True, slots=True)
class ChannelParams:
    vol_kappa: float = 0.25
    drift_decay: float = 0.97
    amp_lambda: float = 0.10
    amp_rag: float = 0.02
    amp_news: float = 0.02
    drift_cap_daily: float = 0.005
    return_clip: float = 0.20

    def problems(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if not _is_number(value) or not math.isfinite(value):
                out.append(f"channel_params.{f.name} must be a finite number")
            elif value < 0:
                out.append(f"channel_params.{f.name} must be non-negative")
        if _is_number(self.drift_decay) and not 0 < self.drift_decay <= 1:
            out.append("channel_params.drift_decay must lie in (0, 1]")
        if _is_number(self.return_clip) and not 0 < self.return_clip <= 1:
            out.append("channel_params.return_clip must lie in (0, 1]")
        return out

    def amplification(self, lam: float, rag: bool, use_news: bool) -> float:
        return 1.0 + self.amp_lambda * lam + self.amp_rag * float(rag) + self.amp_news * float(use_news)


def default_prompt_variants() -> tuple[str, ...]:
    from stresslab.generation.prompts import PROMPT_VARIANTS
    return tuple(PROMPT_VARIANTS)


@dataclass(frozen=True, slots=True)
class RunConfig:
    countries: tuple[str, ...] = G7
    model_id: str = "synthetic-macro-1"
    rag: bool = True
    use_news: bool = True
    prompt_variants: tuple[str, ...] = field(default_factory=default_prompt_variants)
    horizon_days: int = 63
    n_paths: int = 20000
    seed: int = 42
    channel_params: ChannelParams = field(default_factory=ChannelParams)

    provider: str = "synthetic:42"
    as_of_date: str = "2025-09-30"
    rates_are_levels: bool = True
    growth_inflation_are_levels: bool = False
    top_k: int = 3
    headline_k: int = 20
    accept_threshold: float = 2.0
    lambda_theta: float = 8.0
    min_history_days: int = 2500
    bootstrap_resamples: int = 50000
    ci_resamples: int = 10000
    garch_paths: int = 20000
    mu_base: float = 0.0
    qc_threshold: float = 20.0
    regime_classifier: str = "lexical"
    embedding_provider: str = "hashing"
    baseline_id: str = "unconditional_2000_2025"
    windows: Mapping[str, tuple[str, str]] = field(default_factory=lambda: dict(DEFAULT_WINDOWS))
    prices_path: str = "prices.csv"
    weo_path: str = "weo.json"
    headlines_dir: str = "headlines"
    episode_metrics_path: str = ""
    compare_runs: tuple[str, ...] = ()

    def configs(self) -> list[tuple[bool, bool]]:
        """(rag, use_news) arms in canonical order; a True flag adds the on-arm."""
        rag_arms = (False, True) if self.rag else (False,)
        news_arms = (False, True) if self.use_news else (False,)
        return [(r, n) for r in rag_arms for n in news_arms]

    def problems(self) -> list[str]:
        out = []
        if not self.countries:
            out.append("countries must be non-empty")
        if len(set(self.countries)) != len(self.countries):
            out.append("countries must be unique")
        if not self.prompt_variants:
            out.append("prompt_variants must be non-empty")
        if len(set(self.prompt_variants)) != len(self.prompt_variants):
            out.append("prompt_variants must be unique")
        for name in ("horizon_days", "n_paths", "top_k", "headline_k", "bootstrap_resamples", "ci_resamples", "garch_paths"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                out.append(f"{name} must be an integer >= 1")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            out.append("seed must be an integer")
        if not self.lambda_theta > 0:
            out.append("lambda_theta must be positive")
        for name in ("pca", "calm", *CRISIS_EPISODES, "unconditional"):
            if name not in self.windows:
                out.append(f"windows.{name} missing")
            else:
                start, end = self.windows[name]
                if str(start) >= str(end):
                    out.append(f"windows.{name} start must precede end")
        out.extend(self.channel_params.problems())
        return out

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ChannelParams):
                value = {p.name: getattr(value, p.name) for p in fields(value)}
            elif isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, Mapping):
                value = {k: list(v) for k, v in value.items()}
            out[f.name] = value
        return out


def run_config_from_dict(data: Mapping[str, Any], base_dir: str | Path | None = None) -> RunConfig:
    """Build and validate a RunConfig; every problem is reported at once."""
    if not isinstance(data, Mapping):
        raise ConfigError("run config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    problems = [f"unknown key '{k}'" for k in data if k not in known]

    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            continue
        if key == "channel_params":
            if not isinstance(value, Mapping):
                problems.append("channel_params must be an object")
                continue
            cp_known = {f.name for f in fields(ChannelParams)}
            problems.extend(f"unknown key 'channel_params.{k}'" for k in value if k not in cp_known)
            value = ChannelParams(**{k: v for k, v in value.items() if k in cp_known})
        elif key == "windows":
            if not isinstance(value, Mapping):
                problems.append("windows must be an object")
                continue
            merged = dict(DEFAULT_WINDOWS)
            merged.update({k: tuple(v) for k, v in value.items()})
            value = merged
        elif key in ("countries", "prompt_variants", "compare_runs"):
            if not isinstance(value, list):
                problems.append(f"{key} must be a list")
                continue
            value = tuple(value)
        elif key.endswith("_path") or key == "headlines_dir":
            if value and base_dir is not None and not Path(value).is_absolute():
                value = str(Path(base_dir) / value)
        kwargs[key] = value

    if "compare_runs" in kwargs and base_dir is not None:
        kwargs["compare_runs"] = tuple(
            v if Path(v).is_absolute() else str(Path(base_dir) / v) for v in kwargs["compare_runs"]
        )

    try:
        cfg = RunConfig(**kwargs)
    except TypeError as e:
        raise ConfigError("run config rejected", [str(e)])
    if base_dir is not None:
        for key in ("prices_path", "weo_path", "headlines_dir"):
            if key not in kwargs:
                cfg = replace(cfg, **{key: str(Path(base_dir) / getattr(cfg, key))})
    problems.extend(cfg.problems())
    if problems:
        raise ConfigError("invalid run config", problems)
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"run config not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"run config {path} is not valid JSON", [str(e)])
    cfg = run_config_from_dict(data, base_dir=path.parent)
    logger.debug(f"stage=config event=run_config_loaded path={path} countries={len(cfg.countries)}")
    return cfg
