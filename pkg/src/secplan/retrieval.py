"""Embedding and exact top-k cosine retrieval.

The index is a flat exact scan: corpora here are thousands of chunks, and
exactness keeps the brute-force oracle test total. Scores are cosine
similarity with an explicit zero-norm convention (score 0), and ordering is
a total order (score descending, then chunk_id ascending) so end-to-end
golden tests are stable.

Two embedding providers ship with the engine: a deterministic token-hashing
embedder (offline default; identical text always yields identical vectors)
and an HTTP client for hosted embedding endpoints (see ``secplan.llm``).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from secplan.corpus import DocumentKind
from secplan.errors import DimensionMismatch, DuplicateChunk, InvalidQuery

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 8
INDEX_FORMAT = "vector-index/1"


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    score: float
    rank: int


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> list[float]: ...


def embed_text(text: str, provider: EmbeddingProvider) -> list[float]:
    """Embed text through a provider, enforcing the dimension contract."""
    if not text or not text.strip():
        raise InvalidQuery("cannot embed empty text")
    values = provider.embed(text)
    if len(values) != provider.dim:
        raise DimensionMismatch(
            f"provider declared dim={provider.dim} but returned {len(values)} values"
        )
    if not all(math.isfinite(v) for v in values):
        raise InvalidQuery("embedding contains non-finite values")
    return values


class HashEmbeddingProvider:
    """Deterministic bag-of-tokens embedder built on feature hashing.

    Each lowercase token contributes a fixed pseudo-random unit pattern
    derived from its SHA-256 digest; the token patterns are summed with term
    frequency and the result is L2-normalized. Token overlap therefore maps
    to cosine similarity, which is what the fixture corpora are authored
    against. No network, no nondeterminism.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise InvalidQuery(f"embedding dim must be >= 1, got {dim}")
        self.dim = dim
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        values = np.empty(self.dim, dtype=np.float64)
        counter = 0
        filled = 0
        while filled < self.dim:
            digest = hashlib.sha256(f"{token}\x00{counter}".encode("utf-8")).digest()
            for off in range(0, len(digest) - 3, 4):
                if filled >= self.dim:
                    break
                word = int.from_bytes(digest[off : off + 4], "big")
                values[filled] = (word / 2**31) - 1.0
                filled += 1
            counter += 1
        vec = values / np.linalg.norm(values)
        self._token_cache[token] = vec
        return vec

    def embed(self, text: str) -> list[float]:
        tokens = [t for t in "".join(c if c.isalnum() else " " for c in text.lower()).split() if t]
        if not tokens:
            raise InvalidQuery("text has no tokens to embed")
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            acc += self._token_vector(token)
        norm = np.linalg.norm(acc)
        if norm > 0:
            acc /= norm
        return [float(v) for v in acc]


class VectorIndex:
    """Flat exact-cosine index over chunk embeddings.

    Mutation (add) requires exclusive access; the engine builds indices
    fully before serving queries, so the common mode is read-only sharing.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidQuery(f"index dim must be >= 1, got {dim}")
        self.dim = dim
        self._ids: list[str] = []
        self._kinds: list[DocumentKind] = []
        self._rows: list[list[float]] = []
        self._id_set: set[str] = set()
        self._matrix: np.ndarray | None = None
        self._norms: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, chunk_id: str, vector: list[float], doc_kind: DocumentKind) -> None:
        if len(vector) != self.dim:
            raise DimensionMismatch(
                f"vector has dim {len(vector)}, index has dim {self.dim}"
            )
        if chunk_id in self._id_set:
            raise DuplicateChunk(f"chunk {chunk_id!r} already indexed")
        self._ids.append(chunk_id)
        self._kinds.append(DocumentKind(doc_kind))
        self._rows.append([float(v) for v in vector])
        self._id_set.add(chunk_id)
        self._matrix = None
        self._norms = None

    def _ensure_matrix(self) -> None:
        if self._matrix is None:
            self._matrix = np.asarray(self._rows, dtype=np.float64)
            self._norms = np.linalg.norm(self._matrix, axis=1)

    def search(
        self,
        query: list[float],
        k: int,
        kind_filter: DocumentKind | None = None,
    ) -> list[RetrievalHit]:
        """Exact top-k cosine search; min(k, matching entries) hits returned."""
        if len(query) != self.dim:
            raise DimensionMismatch(
                f"query has dim {len(query)}, index has dim {self.dim}"
            )
        if k < 0:
            raise InvalidQuery(f"k must be >= 0, got {k}")
        if k == 0 or not self._ids:
            return []

        self._ensure_matrix()
        assert self._matrix is not None and self._norms is not None
        q = np.asarray(query, dtype=np.float64)
        qnorm = float(np.linalg.norm(q))
        if qnorm == 0.0:
            scores = np.zeros(len(self._ids), dtype=np.float64)
        else:
            dots = self._matrix @ q
            denom = self._norms * qnorm
            scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)

        if kind_filter is not None:
            kind_filter = DocumentKind(kind_filter)
            candidates = [i for i, kd in enumerate(self._kinds) if kd == kind_filter]
        else:
            candidates = range(len(self._ids))

        ordered = sorted(candidates, key=lambda i: (-scores[i], self._ids[i]))[:k]
        return [
            RetrievalHit(chunk_id=self._ids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(ordered, start=1)
        ]

    # ------------------------------------------------------------------
    # Persistence (vector-index/1)
    # ------------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the index in the documented vector-index/1 JSON layout."""
        entries = sorted(
            (
                {"chunk_id": cid, "kind": kind.value, "values": row}
                for cid, kind, row in zip(self._ids, self._kinds, self._rows)
            ),
            key=lambda e: e["chunk_id"],
        )
        payload = {
            "format": INDEX_FORMAT,
            "dim": self.dim,
            "count": len(entries),
            "entries": entries,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != INDEX_FORMAT:
            raise InvalidQuery(f"unsupported index format {payload.get('format')!r}")
        index = cls(dim=payload["dim"])
        for entry in payload["entries"]:
            index.add(entry["chunk_id"], entry["values"], DocumentKind(entry["kind"]))
        if len(index) != payload["count"]:
            raise InvalidQuery(
                f"index file declares {payload['count']} entries, found {len(index)}"
            )
        return index


def build_index(corpus, provider: EmbeddingProvider, kinds=None) -> VectorIndex:
    """Embed every chunk of a corpus (optionally filtered by kind)."""
    index = VectorIndex(dim=provider.dim)
    for chunk in corpus.chunks.values():
        kind = corpus.kind_of(chunk.chunk_id)
        if kinds is not None and kind not in kinds:
            continue
        index.add(chunk.chunk_id, embed_text(chunk.text, provider), kind)
    return index
