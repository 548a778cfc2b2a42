"""
Exact inner-product index with seeded tie-breaking.
"""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from stresslab.core.errors import IngestError

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"SLFX"
SEED_DELIMITER = "|"

# scores equal after rounding are treated as ties
TIE_DECIMALS = 12


def retrieval_seed(country: str, utc_date: str) -> int:
    """First 8 bytes (big-endian) of SHA-256 over `country|utc_date`."""
    if not country or not utc_date:
        raise ValueError("retrieval_seed needs a non-empty country and date")
    digest = hashlib.sha256(f"{country}{SEED_DELIMITER}{utc_date}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class FlatIndex:
    keys: tuple[str, ...]
    vectors: np.ndarray
    tie_seed: int = 0
    weights_hash: str = ""

    @classmethod
    def build(cls, keys: Sequence[str], vectors: np.ndarray, tie_seed: int = 0, weights_hash: str = "") -> "FlatIndex":
        vectors = np.ascontiguousarray(vectors, dtype=float)
        if vectors.ndim != 2 or len(keys) != vectors.shape[0]:
            raise ValueError("keys and vectors disagree in length")
        if len(set(keys)) != len(keys):
            raise ValueError("index keys must be unique")
        norms = np.linalg.norm(vectors, axis=1)
        if len(norms) and np.abs(norms - 1.0).max() > 1e-6:
            raise ValueError("index rows must be unit-norm")
        vectors.setflags(write=False)
        return cls(tuple(keys), vectors, int(tie_seed), weights_hash)

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class TopK:
    hits: list[tuple[str, float]]
    truncated: bool = False
    note: str = ""

    def __iter__(self):
        return iter(self.hits)

    def __len__(self):
        return len(self.hits)

    def __getitem__(self, i):
        return self.hits[i]

    @property
    def ids(self) -> list[str]:
        return [key for key, _ in self.hits]


def top_k(index: FlatIndex, query: np.ndarray, k: int, tie_seed: int | None = None) -> TopK:
    """
    Exact k-nearest rows by inner product, descending.

    Ties (equal to TIE_DECIMALS) are ordered by a permutation drawn from the
    tie seed, then by key.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.n == 0:
        raise ValueError("index is empty")
    scores = index.vectors @ np.asarray(query, dtype=float)
    seed = index.tie_seed if tie_seed is None else tie_seed
    rank = np.empty(index.n, dtype=np.int64)
    rank[np.random.default_rng(seed).permutation(index.n)] = np.arange(index.n)

    order = sorted(range(index.n), key=lambda i: (-round(float(scores[i]), TIE_DECIMALS), int(rank[i]), index.keys[i]))
    truncated = k > index.n
    note = f"k={k} exceeds index size {index.n}; returning all rows" if truncated else ""
    if truncated:
        logger.debug(f"stage=retrieval event=topk_truncated k={k} n={index.n}")
    hits = [(index.keys[i], float(scores[i])) for i in order[: min(k, index.n)]]
    return TopK(hits, truncated, note)


def save_index(path: str | Path, index: FlatIndex) -> Path:
    """
    Layout: magic, <d:uint32, n:uint32, tie_seed:uint64>, 64-byte weights hash,
    n*d little-endian float64 rows, then a length-prefixed JSON key list.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    weights = index.weights_hash.encode("ascii").ljust(64, b"\0")[:64]
    keys_blob = json.dumps(list(index.keys), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<IIQ", index.dim, index.n, index.tie_seed % (1 << 64)))
        f.write(weights)
        f.write(index.vectors.astype("<f8").tobytes(order="C"))
        f.write(struct.pack("<I", len(keys_blob)))
        f.write(keys_blob)
    return path


def load_index(path: str | Path) -> FlatIndex:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"index file not found: {path}")
    data = path.read_bytes()
    if data[:4] != INDEX_MAGIC:
        raise IngestError(f"{path}: not a flat index file")
    dim, n, tie_seed = struct.unpack_from("<IIQ", data, 4)
    offset = 4 + 16
    weights_hash = data[offset:offset + 64].rstrip(b"\0").decode("ascii")
    offset += 64
    size = n * dim * 8
    vectors = np.frombuffer(data, dtype="<f8", count=n * dim, offset=offset).reshape(n, dim).astype(float)
    offset += size
    (blob_len,) = struct.unpack_from("<I", data, offset)
    keys = json.loads(data[offset + 4:offset + 4 + blob_len].decode("utf-8"))
    return FlatIndex.build(keys, vectors, tie_seed, weights_hash)
