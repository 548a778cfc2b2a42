"""
Generation providers: fixture replay, HTTP chat endpoint, and a synthetic
offline generator.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Any, Protocol

import numpy as np
import requests

from stresslab.config.config import HTTP_API_KEY_ENV
from stresslab.config.worker_config import COMPONENT_SETTINGS, HTTP_TIMEOUT, MAX_RETRIES, RETRY_DELAY_BASE
from stresslab.core.errors import ConfigError, ProviderError
from stresslab.generation.prompts import PromptBundle

logger = logging.getLogger(__name__)


class GenerationProvider(Protocol):
    model_id: str
    model_version: str
    provider_name: str

    def generate(self, bundle: PromptBundle, seed: int) -> str: ...

    def settings(self) -> dict[str, Any]: ...


class _CallLog:
    """Per-call latency and token accounting, safe across worker threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self.calls: list[dict[str, Any]] = []

    def record(self, bundle: PromptBundle, started: float, ok: bool, tokens: int | None = None):
        entry = {
            "country": bundle.country,
            "prompt_variant": bundle.prompt_variant,
            "rag": bundle.rag,
            "use_news": bundle.use_news,
            "latency_ms": round((time.perf_counter() - started) * 1000.0, 3),
            "ok": ok,
        }
        if tokens is not None:
            entry["total_tokens"] = tokens
        with self._lock:
            self.calls.append(entry)


class FixtureProvider(_CallLog):
    """Replays recorded responses keyed by (prompt_hash, ctx_hash)."""

    def __init__(self, path: str | Path):
        super().__init__()
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigError(f"fixture file not found: {self.path}")
        self.responses: dict[tuple[str, str], str] = {}
        meta: dict[str, str] = {}
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    key = (row["prompt_hash"], row["ctx_hash"])
                    response = row["response"]
                except (json.JSONDecodeError, KeyError) as e:
                    raise ConfigError(f"{self.path}: bad fixture line {line_no} ({e})")
                if key in self.responses and self.responses[key] != response:
                    raise ConfigError(f"{self.path}: conflicting responses for key at line {line_no}")
                self.responses[key] = response
                if not meta:
                    meta = {k: row.get(k, "") for k in ("model_id", "model_version", "provider")}
        self.model_id = meta.get("model_id") or "fixture"
        self.model_version = meta.get("model_version") or self.model_id
        self.provider_name = meta.get("provider") or "fixture"
        logger.info(f"stage=generate event=fixtures_loaded file={self.path.name} responses={len(self.responses)}")

    def generate(self, bundle: PromptBundle, seed: int) -> str:
        started = time.perf_counter()
        key = (bundle.prompt_hash, bundle.ctx_hash)
        if key not in self.responses:
            self.record(bundle, started, False)
            raise ProviderError(
                f"no fixture response for prompt_hash={bundle.prompt_hash[:12]} ctx_hash={bundle.ctx_hash[:12]}"
            )
        self.record(bundle, started, True)
        return self.responses[key]

    def settings(self) -> dict[str, Any]:
        return {"kind": "fixture", "path": str(self.path), "responses": len(self.responses)}


class HttpProvider(_CallLog):
    """OpenAI-compatible chat-completions endpoint."""

    def __init__(self, url: str, model: str, api_key_env: str = HTTP_API_KEY_ENV,
                 temperature: float | None = None, max_tokens: int | None = None,
                 provider_name: str = "http", timeout: float = HTTP_TIMEOUT):
        super().__init__()
        gen = COMPONENT_SETTINGS["generation"]
        self.url = url
        self.model_id = model
        self.model_version = model
        self.provider_name = provider_name
        self.api_key_env = api_key_env
        self.temperature = gen["temperature"] if temperature is None else temperature
        self.max_tokens = gen["max_tokens"] if max_tokens is None else max_tokens
        self.timeout = timeout
        self.session = requests.Session()

    @classmethod
    def from_spec(cls, spec: str) -> "HttpProvider":
        """spec is a JSON endpoint-config file: {url, model, api_key_env?, temperature?, ...}"""
        path = Path(spec)
        if not path.exists():
            raise ConfigError(f"http endpoint config not found: {spec}")
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
        if "url" not in cfg or "model" not in cfg:
            raise ConfigError(f"{spec}: endpoint config needs 'url' and 'model'")
        return cls(**{k: v for k, v in cfg.items() if k in
                      ("url", "model", "api_key_env", "temperature", "max_tokens", "provider_name", "timeout")})

    def _payload(self, bundle: PromptBundle, seed: int) -> dict[str, Any]:
        return {
            "model": self.model_id,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "seed": seed,
        }

    def generate(self, bundle: PromptBundle, seed: int) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.getenv(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"

        last_error = None
        for attempt in range(MAX_RETRIES + 1):
            started = time.perf_counter()
            try:
                resp = self.session.post(self.url, json=self._payload(bundle, seed), headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                tokens = (body.get("usage") or {}).get("total_tokens")
                self.record(bundle, started, True, tokens)
                return text
            except (requests.RequestException, KeyError, IndexError, ValueError) as e:
                self.record(bundle, started, False)
                last_error = e
                logger.warning(
                    f"stage=generate event=http_attempt_failed country={bundle.country} "
                    f"variant={bundle.prompt_variant} attempt={attempt + 1} error={e}"
                )
                if attempt < MAX_RETRIES:
                    time.sleep(RETRY_DELAY_BASE ** attempt)
        raise ProviderError(f"http provider failed after {MAX_RETRIES + 1} attempts: {last_error}")

    def settings(self) -> dict[str, Any]:
        return {"kind": "http", "url": self.url, "model": self.model_id,
                "temperature": self.temperature, "max_tokens": self.max_tokens, "timeout_s": self.timeout}


_SECTOR_POOL = (
    "Regional banks and non-bank lenders",
    "Commercial real estate and construction",
    "Energy and base metals exporters",
    "Export-dependent manufacturing",
    "Consumer discretionary and retail",
    "Insurance (credit and mortgage-linked exposures)",
    "Airlines, travel and hospitality",
    "Technology and semiconductors",
    "Utilities with floating-rate debt",
    "Agriculture and food processing",
)

_SEVERITY_WORDS = {
    "normal": ("slowdown", "moderation", "softening"),
    "stress": ("stress", "tightening", "downturn", "strain", "spillover"),
    "crisis": ("crisis", "contagion", "collapse", "panic", "default"),
}


class SyntheticProvider(_CallLog):
    """
    Deterministic offline generator. Output depends only on
    (prompt_hash, ctx_hash, seed) and is wrapped in prose and a code fence
    like chat model output.
    """

    provider_name = "synthetic"

    def __init__(self, seed: int = 0, model_id: str = "synthetic-macro-1"):
        super().__init__()
        self.seed = int(seed)
        self.model_id = model_id
        self.model_version = f"{model_id}-seed{self.seed}"

    def _rng(self, bundle: PromptBundle, seed: int) -> np.random.Generator:
        digest = hashlib.sha256(f"{bundle.prompt_hash}|{bundle.ctx_hash}|{self.seed}|{seed}".encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:16], "big"))

    def generate(self, bundle: PromptBundle, seed: int) -> str:
        started = time.perf_counter()
        rng = self._rng(bundle, seed)
        base = bundle.baseline

        news_tilt = 0.3 if bundle.has_headlines else 0.0
        d_gdp = -float(rng.uniform(0.5, 3.5)) - news_tilt
        d_infl = float(rng.uniform(-0.8, 3.0))
        d_rate = float(rng.uniform(-0.5, 3.0))
        if d_gdp <= -2.0 and d_infl < 0.0 and d_rate > 0.0:
            d_rate = -d_rate
        rate_level = round(base.interest_rate + d_rate, 2)

        tier = "crisis" if d_gdp < -2.8 else ("stress" if d_gdp < -1.2 else "normal")
        words = list(_SEVERITY_WORDS[tier])
        rng.shuffle(words)
        n_sectors = int(rng.integers(2, 6))
        sectors = [str(s) for s in rng.choice(_SECTOR_POOL, size=n_sectors, replace=False)]
        rationale = (
            f"{bundle.variant_text.rstrip('.')} hits {bundle.country} in Q4 2026. "
            f"The shock propagates through {sectors[0].lower()} and tighter financial conditions, "
            f"producing a {words[0]} that lowers real GDP growth by {abs(d_gdp):.1f} percentage points. "
            f"Inflation moves by {d_infl:+.1f} points as import prices and wage dynamics adjust, "
            f"and the policy rate settles near {rate_level:.2f} percent as the central bank balances "
            f"{words[1]} against price stability. Household and business confidence weakens, "
            f"investment is postponed and credit growth slows, so the {words[-1]} spreads to "
            f"{', '.join(s.lower() for s in sectors[1:]) or 'the wider economy'}. "
            f"Exposed balance sheets face higher funding costs and falling asset values, and the "
            f"recovery is delayed into 2027 as fiscal buffers are used to stabilise demand."
        )
        record = {
            "country": bundle.country,
            "title": f"Q4-2026 {bundle.prompt_variant.split('_', 1)[-1].replace('_', ' ').title()} Scenario for {bundle.country}",
            "gdp_growth": round(d_gdp, 2),
            "inflation": round(d_infl, 2),
            "interest_rate": rate_level,
            "rationale": rationale,
            "risk_sectors": sectors,
        }
        body = json.dumps(record, indent=2, ensure_ascii=False)
        self.record(bundle, started, True)
        return f"Here is the requested scenario.\n```json\n{body}\n```\nAll values are in percentage points."

    def settings(self) -> dict[str, Any]:
        return {"kind": "synthetic", "seed": self.seed, "model": self.model_id}


def make_provider(spec: str, offline: bool = True, base_dir: str | Path | None = None) -> GenerationProvider:
    """`fixture:<path>`, `http:<endpoint-config>` or `synthetic:<seed>`."""
    kind, _, arg = spec.partition(":")
    if kind == "fixture":
        path = Path(arg)
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = Path(base_dir) / path
        return FixtureProvider(path)
    if kind == "synthetic":
        try:
            return SyntheticProvider(int(arg or 0))
        except ValueError:
            raise ConfigError(f"synthetic provider seed must be an integer: '{spec}'")
    if kind == "http":
        if offline:
            raise ConfigError("http provider requested while --offline is set; pass --online")
        return HttpProvider.from_spec(arg)
    raise ConfigError(f"unknown provider spec '{spec}'")
