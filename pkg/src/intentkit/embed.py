"""Pluggable sentence-embedding providers.

Two kinds: a deterministic hashed bag-of-words embedder for tests and
offline baselines, and a client for a remote embedding service that wraps
a frozen language model out-of-process. Both satisfy the same contract:
one finite vector per text, fixed dimension, deterministic per provider.
"""
from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import requests

from .errors import DataFormatError, NetworkError

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash; fixed and platform-stable, used for bucketing."""
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def bow_tokens(text: str) -> list[str]:
    """Case-fold, strip punctuation, split on whitespace."""
    return _PUNCT.sub(" ", text.casefold()).split()


def bow_bucket(token: str, dim: int) -> int:
    return fnv1a_64(token.encode("utf-8")) % dim


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    provider_id: str

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(f"vector length {len(self.values)} != dim {self.dim}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector contains non-finite values")


def hash_bow(text: str, dim: int, provider_id: str | None = None) -> EmbeddingVector:
    """L2-normalized hashed bag-of-words vector; empty text maps to zeros."""
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    counts = [0.0] * dim
    for token in bow_tokens(text):
        counts[bow_bucket(token, dim)] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm > 0:
        counts = [c / norm for c in counts]
    return EmbeddingVector(
        values=tuple(counts),
        dim=dim,
        provider_id=provider_id or f"hashed_bow/fnv1a64/{dim}",
    )


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int
    kind: str

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@dataclass(frozen=True)
class HashedBowProvider:
    """Built-in deterministic embedder; no external process involved."""

    dim: int = 256
    kind: str = "hashed_bow"

    @property
    def provider_id(self) -> str:
        return f"hashed_bow/fnv1a64/{self.dim}"

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        pid = self.provider_id
        return [hash_bow(text, self.dim, pid) for text in texts]


class RemoteEmbeddingProvider:
    """Client for a JSON embedding endpoint: {"texts": [...]} -> {"vectors": [[...]]}.

    Large batches are chunked and sent with a bounded number of in-flight
    requests; output order always matches input order. Texts are serialized
    exactly as given, never normalized or trimmed.
    """

    kind = "remote"

    def __init__(
        self,
        url: str,
        dim: int,
        provider_id: str | None = None,
        timeout: float = 60.0,
        chunk_size: int = 64,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ) -> None:
        if dim < 1:
            raise ValueError("dim must be positive")
        self.url = url
        self.dim = dim
        self.provider_id = provider_id or f"remote/{url}/{dim}"
        self.timeout = timeout
        self.chunk_size = max(1, chunk_size)
        self.max_in_flight = max(1, max_in_flight)
        self._session = session or requests.Session()

    def _post_chunk(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        payload = json.dumps({"texts": list(texts)}, ensure_ascii=False).encode("utf-8")
        try:
            resp = self._session.post(
                self.url,
                data=payload,
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise NetworkError(f"embedding endpoint {self.url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise NetworkError(
                f"embedding endpoint {self.url} returned {resp.status_code}: {resp.text[:500]}"
            )
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise DataFormatError(f"embedding response is not {{'vectors': [...]}}: {exc}") from exc
        if len(vectors) != len(texts):
            raise DataFormatError(
                f"embedding endpoint returned {len(vectors)} vectors for {len(texts)} texts"
            )
        out = []
        for vec in vectors:
            if len(vec) != self.dim:
                raise DataFormatError(
                    f"embedding dimension mismatch: provider dim {self.dim}, got {len(vec)}"
                )
            out.append(EmbeddingVector(values=tuple(float(v) for v in vec),
                                       dim=self.dim, provider_id=self.provider_id))
        return out

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        texts = list(texts)
        if not texts:
            return []
        chunks = [texts[i:i + self.chunk_size] for i in range(0, len(texts), self.chunk_size)]
        if len(chunks) == 1:
            return self._post_chunk(chunks[0])
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            results = list(pool.map(self._post_chunk, chunks))
        return [vec for chunk in results for vec in chunk]


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> list[EmbeddingVector]:
    """One vector per text, order preserved, deterministic per provider."""
    if any(not isinstance(t, str) for t in texts):
        raise ValueError("texts must be strings")
    return provider.embed_batch(texts)
