"""
Narrative regime classification over {normal, stress, crisis}.

The lexical classifier is always available. The NLI classifier runs a
transformers zero-shot pipeline and drops back to the lexical one when the
model cannot be loaded.
"""
from __future__ import annotations

import logging
import threading
from typing import Protocol

import numpy as np

from stresslab.config.config import REGIME_MODEL
from stresslab.core.errors import ConfigError
from stresslab.core.model import REGIME_LABELS
from stresslab.retrieval.embedding import tokenize

logger = logging.getLogger(__name__)

# normal, stress, crisis
LEXICAL_PRIOR = np.array([0.6, 0.25, 0.15])
PRIOR_WEIGHT = 2.0

LEXICON_STEMS = {
    "normal": ("stable", "stabil", "moderat", "resilien", "steady", "recover", "mild", "benign", "soft", "gradual"),
    "stress": ("stress", "tighten", "downturn", "recession", "strain", "spillover", "squeez", "volatil",
               "pressure", "shock", "contraction", "selloff", "turmoil"),
    "crisis": ("crisis", "crises", "contagio", "collaps", "panic", "default", "meltdown", "insolven",
               "depression", "systemic", "crash", "bankrupt"),
}


class RegimeClassifier(Protocol):
    name: str

    def classify(self, text: str) -> tuple[tuple[float, float, float], float]: ...


def regime_score(probs) -> float:
    return float(min(1.0, max(0.0, 0.5 * probs[1] + 1.0 * probs[2])))


def lexicon_counts(text: str) -> np.ndarray:
    counts = np.zeros(3)
    for token in tokenize(text):
        for i, label in enumerate(REGIME_LABELS):
            if any(token.startswith(stem) for stem in LEXICON_STEMS[label]):
                counts[i] += 1
                break
    return counts


def lexical_regime_fallback(rationale: str) -> tuple[tuple[float, float, float], float]:
    """Prior-smoothed lexicon counts; score = 0.5 * p_stress + p_crisis."""
    weights = PRIOR_WEIGHT * LEXICAL_PRIOR + lexicon_counts(rationale or "")
    probs = weights / weights.sum()
    triple = (float(probs[0]), float(probs[1]), float(1.0 - probs[0] - probs[1]))
    return triple, regime_score(triple)


class LexicalRegimeClassifier:
    name = "lexical"

    def classify(self, text: str):
        return lexical_regime_fallback(text)


class NliRegimeClassifier:
    """Zero-shot NLI over one hypothesis per regime label."""

    hypothesis_template = "This economic scenario describes {} conditions."

    def __init__(self, model_name: str = REGIME_MODEL):
        self.model_name = model_name
        self.name = f"nli:{model_name}"
        self._pipeline = None
        self._failed = False
        self._lock = threading.Lock()

    def _load(self):
        with self._lock:
            if self._pipeline is None and not self._failed:
                try:
                    from transformers import pipeline

                    self._pipeline = pipeline("zero-shot-classification", model=self.model_name, device=-1)
                    logger.info(f"stage=audit event=nli_loaded model={self.model_name}")
                except Exception as e:
                    self._failed = True
                    logger.warning(f"stage=audit event=nli_unavailable model={self.model_name} error={str(e)}")
        return self._pipeline

    def classify(self, text: str):
        clf = self._load()
        if clf is None or not text:
            return lexical_regime_fallback(text)
        try:
            out = clf(text, candidate_labels=list(REGIME_LABELS), hypothesis_template=self.hypothesis_template,
                      multi_label=False)
        except Exception as e:
            logger.error(f"stage=audit event=nli_failed error={str(e)}")
            return lexical_regime_fallback(text)
        scores = dict(zip(out["labels"], out["scores"]))
        probs = np.array([scores[label] for label in REGIME_LABELS], dtype=float)
        probs = probs / probs.sum()
        triple = (float(probs[0]), float(probs[1]), float(1.0 - probs[0] - probs[1]))
        return triple, regime_score(triple)


def make_regime_classifier(spec: str = "lexical") -> RegimeClassifier:
    kind, _, arg = spec.partition(":")
    if kind == "lexical":
        return LexicalRegimeClassifier()
    if kind == "nli":
        return NliRegimeClassifier(arg or REGIME_MODEL)
    raise ConfigError(f"unknown regime classifier '{spec}'")
