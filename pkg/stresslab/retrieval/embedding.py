"""
Embedding providers for the knowledge store.

HashingEmbedder is the default: token feature hashing over SHA-256, no model
download. SentenceTransformerEmbedder wraps a sentence-transformers model for
runs that want neural embeddings.
"""
from __future__ import annotations

import hashlib
import logging
import re
from typing import Protocol, Sequence

import numpy as np

from stresslab.config.config import EMBEDDING_MODEL
from stresslab.core.errors import ConfigError

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class EmbeddingProvider(Protocol):
    provider_id: str
    weights_hash: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...

    def embed_many(self, texts: Sequence[str]) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class HashingEmbedder:
    """Signed feature hashing of lowercased word tokens, unit-normalized."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ConfigError("hashing embedder dimension must be >= 2")
        self.dim = dim
        self.provider_id = f"hashing-sha256-d{dim}"
        self.weights_hash = hashlib.sha256(f"{self.provider_id}|v1".encode("utf-8")).hexdigest()
        self._empty = np.zeros(dim)
        self._empty[0] = 1.0

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            slot = int.from_bytes(digest[:4], "big") % self.dim
            vec[slot] += 1.0 if digest[4] & 1 else -1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return self._empty.copy()
        return vec / norm

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.vstack([self.embed(t) for t in texts])


class SentenceTransformerEmbedder:
    def __init__(self, model_name: str = EMBEDDING_MODEL):
        """
        Initialize the embedder with a sentence transformer model.
        """
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_name, device="cpu")
        self.model_name = model_name
        self.provider_id = f"sentence-transformers/{model_name}"
        self.dim = int(self.model.get_sentence_embedding_dimension())
        self.weights_hash = self._hash_weights()
        logger.info(
            f"stage=retrieval event=embedder_initialized model={model_name} "
            f"dim={self.dim} weights_hash={self.weights_hash[:12]}"
        )

    def _hash_weights(self) -> str:
        digest = hashlib.sha256()
        state = self.model.state_dict()
        for name in sorted(state):
            digest.update(name.encode("utf-8"))
            digest.update(state[name].detach().cpu().numpy().tobytes())
        return digest.hexdigest()

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        vectors = self.model.encode(list(texts), normalize_embeddings=True, convert_to_numpy=True)
        return np.asarray(vectors, dtype=float)


def make_embedding_provider(spec: str = "hashing") -> EmbeddingProvider:
    """`hashing`, `hashing:<dim>` or `sentence-transformers[:<model>]`."""
    kind, _, arg = spec.partition(":")
    if kind == "hashing":
        return HashingEmbedder(int(arg) if arg else 64)
    if kind == "sentence-transformers":
        return SentenceTransformerEmbedder(arg or EMBEDDING_MODEL)
    raise ConfigError(f"unknown embedding provider '{spec}'")
