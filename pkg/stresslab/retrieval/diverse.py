"""
Headline exemplar selection: one title per k-means cluster.
"""
from __future__ import annotations

import logging

import numpy as np
from sklearn.cluster import KMeans

from stresslab.config.worker_config import COMPONENT_SETTINGS
from stresslab.ingest_tools.headlines import HeadlineSnapshot
from stresslab.retrieval.embedding import EmbeddingProvider

logger = logging.getLogger(__name__)


def select_diverse_headlines(
    snapshot: HeadlineSnapshot,
    provider: EmbeddingProvider,
    k: int = 20,
    seed: int = 0,
) -> list[str]:
    """
    Up to k real titles, one per cluster, in snapshot order.

    Pad rows are never embedded. With k or fewer real rows every real title
    is returned.
    """
    real = snapshot.real_rows
    titles = [r.title for r in real]
    if len(titles) <= k:
        return titles

    embeddings = provider.embed_many(titles)
    settings = COMPONENT_SETTINGS["kmeans"]
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=1,
        max_iter=settings["max_iter"],
        tol=settings["tol"],
        random_state=int(seed) % (2**32),
    )
    labels = model.fit_predict(embeddings)
    centers = model.cluster_centers_

    chosen: list[int] = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        dists = np.linalg.norm(embeddings[members] - centers[c], axis=1)
        best = min(zip(np.round(dists, 12), (titles[i] for i in members), members), key=lambda t: (t[0], t[1]))
        chosen.append(int(best[2]))

    if len(chosen) < k:
        # degenerate clusterings (duplicate embeddings) leave clusters empty
        logger.debug(
            f"stage=retrieval event=kmeans_topped_up country={snapshot.country} "
            f"clusters={len(chosen)} k={k}"
        )
        picked = set(chosen)
        chosen.extend(i for i in range(len(titles)) if i not in picked)
        chosen = chosen[:k]

    return [titles[i] for i in sorted(chosen)]
