"""Sentence embeddings behind a provider interface, with a persistent cache.

The cache is content-addressed: the key is a hash of the space-joined token
sequence, so two sentences with identical tokens share one entry.  Text is
embedded verbatim (case included) — rankings can be sensitive to casing, so
no normalization happens on the way in.  Vectors round-trip through JSON
lines at full float64 precision.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .corpus import TaggedSentence
from .errors import IntegrityError, RequestError, RetrievalError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_PROVIDER_ID = "all-MiniLM-L6-v2"
DEFAULT_DIM = 384

_RETRYABLE = {429, 500, 502, 503, 504}


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A fixed-dimension sentence vector tagged with its provider."""

    provider_id: str
    dim: int
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.shape != (self.dim,):
            raise IntegrityError(
                f"provider {self.provider_id!r} declares dim {self.dim} "
                f"but vector has shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise IntegrityError(f"non-finite values in vector from {self.provider_id!r}")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a,b) / (|a||b|), clamped into [-1, 1]."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    sim = float(np.dot(a.values, b.values)) / (na * nb)
    return max(-1.0, min(1.0, sim))


def content_key(tokens: Sequence[str]) -> str:
    """Hex hash of the space-joined token sequence (the embedded text)."""
    return hashlib.sha256(" ".join(tokens).encode("utf-8")).hexdigest()


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _seed_digest(token: str, seed: int) -> bytes:
    return hashlib.blake2b(
        token.encode("utf-8"), key=seed.to_bytes(8, "little", signed=True)
    ).digest()


def hash_embed(sentence: TaggedSentence, dim: int, seed: int = 0) -> EmbeddingVector:
    """Deterministic hashed bag-of-tokens embedding, L2-normalized.

    Every token hashes to one coordinate and a sign; accumulation is
    order-free, so sentences with identical token multisets embed
    identically.  Intended for offline tests, not semantic quality.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    acc = np.zeros(dim, dtype=np.float64)
    for token in sentence.tokens:
        digest = _seed_digest(token, seed)
        index = int.from_bytes(digest[:8], "big") % dim
        acc[index] += 1.0 if digest[8] & 1 else -1.0
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:  # total cancellation; keep the vector usable
        acc[0] = 1.0
        norm = 1.0
    return EmbeddingVector(hash_provider_id(dim, seed), dim, acc / norm)


def hash_provider_id(dim: int, seed: int) -> str:
    return f"hash:d{dim}:s{seed}"


class HashEmbedder:
    """Offline provider wrapping `hash_embed`; never touches the network."""

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self.provider_id = hash_provider_id(dim, seed)

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            tokens = tuple(text.split(" "))
            sentence = TaggedSentence(0, tokens, ("O",) * len(tokens))
            out.append(hash_embed(sentence, self.dim, self.seed).values)
        return out


class RemoteEmbeddingProvider:
    """HTTP provider: POST {"texts": [...]} -> {"vectors": [[...], ...]}."""

    def __init__(
        self,
        url: str,
        provider_id: str = DEFAULT_PROVIDER_ID,
        dim: int = DEFAULT_DIM,
        token: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        self.url = url
        self.provider_id = provider_id
        self.dim = dim
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._timeout = timeout
        self._max_retries = max_retries
        self._backoff = backoff
        self._session = session or requests.Session()
        self._sleep = sleep

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        payload = {"texts": list(texts)}
        last: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                self._sleep(min(self._backoff * 2 ** (attempt - 1), 8.0))
            try:
                resp = self._session.post(
                    self.url, json=payload, headers=self._headers, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code == 200:
                vectors = resp.json()["vectors"]
                if len(vectors) != len(texts):
                    raise IntegrityError(
                        f"asked for {len(texts)} embeddings, got {len(vectors)}"
                    )
                return [np.asarray(v, dtype=np.float64) for v in vectors]
            if resp.status_code in _RETRYABLE:
                last = TransportError(f"HTTP {resp.status_code}")
                continue
            raise RequestError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        raise TransportError(
            f"embedding endpoint {self.url} failed after {self._max_retries + 1} attempts: {last}"
        )


class EmbeddingCache:
    """Exact-lookup store keyed by (provider_id, content hash).

    Entries persist as JSON lines; appends are serialized by a lock while
    reads stay lock-free on the underlying dict.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str], EmbeddingVector] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        with self._path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                vec = EmbeddingVector(rec["provider"], rec["dim"], np.asarray(rec["values"]))
                self._entries[(rec["provider"], rec["key"])] = vec

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, provider_id: str, tokens: Sequence[str]) -> EmbeddingVector | None:
        return self._entries.get((provider_id, content_key(tokens)))

    def put(self, tokens: Sequence[str], vector: EmbeddingVector) -> None:
        key = content_key(tokens)
        record = {
            "key": key,
            "provider": vector.provider_id,
            "dim": vector.dim,
            "values": [float(v) for v in vector.values],
        }
        with self._lock:
            self._entries[(vector.provider_id, key)] = vector
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")


def embed(
    sentence: TaggedSentence,
    provider: EmbeddingProvider,
    cache: EmbeddingCache,
) -> EmbeddingVector:
    """Cache-first embedding of one sentence; misses write through."""
    hit = cache.get(provider.provider_id, sentence.tokens)
    if hit is not None:
        return hit
    try:
        values = provider.embed_texts([sentence.text])[0]
    except TransportError as exc:
        raise RetrievalError(
            f"sentence {sentence.id}: cache miss and provider unreachable ({exc})"
        ) from exc
    vector = EmbeddingVector(provider.provider_id, provider.dim, values)
    cache.put(sentence.tokens, vector)
    return vector


def embed_cached(
    sentence: TaggedSentence, provider_id: str, cache: EmbeddingCache
) -> EmbeddingVector:
    """Cache-only lookup by provider id; raises on a miss."""
    hit = cache.get(provider_id, sentence.tokens)
    if hit is None:
        raise RetrievalError(
            f"sentence {sentence.id} has no cached {provider_id!r} embedding"
        )
    return hit


@dataclass
class WarmStats:
    hits: int = 0
    misses: int = 0


def warm_cache(
    sentences: Sequence[TaggedSentence],
    provider: EmbeddingProvider,
    cache: EmbeddingCache,
    batch_size: int = 64,
    jobs: int = 1,
) -> WarmStats:
    """Fill the cache for every sentence; returns hit/miss counts.

    Uncached sentences are embedded in batches, at most `jobs` batches in
    flight at once.  Warming twice is idempotent.
    """
    stats = WarmStats()
    pending: list[TaggedSentence] = []
    seen_keys: set[str] = set()
    for s in sentences:
        if cache.get(provider.provider_id, s.tokens) is not None:
            stats.hits += 1
            continue
        stats.misses += 1
        key = content_key(s.tokens)
        if key not in seen_keys:  # duplicates share one provider call
            seen_keys.add(key)
            pending.append(s)

    def embed_batch(batch: list[TaggedSentence]) -> None:
        vectors = provider.embed_texts([s.text for s in batch])
        for s, values in zip(batch, vectors):
            cache.put(s.tokens, EmbeddingVector(provider.provider_id, provider.dim, values))

    batches = [pending[i : i + batch_size] for i in range(0, len(pending), batch_size)]
    if jobs <= 1 or len(batches) <= 1:
        for batch in batches:
            embed_batch(batch)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(embed_batch, batches))
    return stats
