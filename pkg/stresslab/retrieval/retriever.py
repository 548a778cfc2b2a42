"""
Knowledge-store retriever: peer profiles for RAG and diverse headlines for news.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import pandas as pd

from stresslab.ingest_tools.headlines import HeadlineSnapshot
from stresslab.ingest_tools.weo import CountryBaseline, build_profile
from stresslab.retrieval.diverse import select_diverse_headlines
from stresslab.retrieval.embedding import EmbeddingProvider
from stresslab.retrieval.index import FlatIndex, retrieval_seed, top_k

logger = logging.getLogger(__name__)

_MACRO_MARKERS = {
    "growth": "Real GDP growth",
    "inflation": "Headline inflation",
    "rate": "Short-term interest rate",
}


@dataclass
class ContextRetriever:
    provider: EmbeddingProvider
    index: FlatIndex
    profiles: Mapping[str, str]
    snapshots: Mapping[str, HeadlineSnapshot] = field(default_factory=dict)
    as_of_date: str = "2025-09-30"
    headline_k: int = 20
    _headline_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @classmethod
    def build(
        cls,
        baselines: Mapping[str, CountryBaseline],
        provider: EmbeddingProvider,
        snapshots: Mapping[str, HeadlineSnapshot] | None = None,
        as_of_date: str = "2025-09-30",
        headline_k: int = 20,
        tie_seed: int = 0,
    ) -> "ContextRetriever":
        countries = sorted(baselines)
        profiles = {c: build_profile(baselines[c]) for c in countries}
        vectors = provider.embed_many([profiles[c] for c in countries])
        index = FlatIndex.build(countries, vectors, tie_seed, provider.weights_hash)
        logger.info(
            f"stage=index event=index_built provider={provider.provider_id} "
            f"rows={index.n} dim={index.dim}"
        )
        return cls(provider, index, profiles, dict(snapshots or {}), as_of_date, headline_k)

    def retrieve(self, country: str, k: int = 3) -> list[tuple[str, float]]:
        """k nearest peer profiles; the target itself is excluded."""
        query = self.provider.embed(self.profiles[country])
        seed = retrieval_seed(country, self.as_of_date)
        hits = top_k(self.index, query, k + 1, tie_seed=seed)
        return [(key, score) for key, score in hits if key != country][:k]

    def diverse_headlines(self, country: str) -> list[str]:
        # grid workers share one retriever
        with self._cache_lock:
            if country not in self._headline_cache:
                snapshot = self.snapshots.get(country)
                if snapshot is None:
                    self._headline_cache[country] = []
                else:
                    seed = retrieval_seed(country, self.as_of_date)
                    self._headline_cache[country] = select_diverse_headlines(
                        snapshot, self.provider, self.headline_k, seed
                    )
            return list(self._headline_cache[country])


def retrieval_qc(retriever: ContextRetriever, countries: Sequence[str], k: int = 3) -> pd.DataFrame:
    """Per-country peer scores plus macro-field coverage of the target profile."""
    rows = []
    for country in countries:
        profile = retriever.profiles.get(country, "")
        coverage = {f"has_{name}": int(marker in profile) for name, marker in _MACRO_MARKERS.items()}
        snapshot = retriever.snapshots.get(country)
        real = len(snapshot.real_rows) if snapshot else 0
        for rank, (peer, score) in enumerate(retriever.retrieve(country, k), start=1):
            rows.append({"country": country, "rank": rank, "peer": peer, "score": round(score, 10),
                         "real_headlines": real, **coverage})
    return pd.DataFrame(
        rows,
        columns=["country", "rank", "peer", "score", "real_headlines", "has_growth", "has_inflation", "has_rate"],
    )
