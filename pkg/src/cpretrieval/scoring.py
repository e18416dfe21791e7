"""Complexity metrics, pool-wide normalization, and candidate ranking.

A candidate example is scored against a test sentence with three metrics:
cosine similarity of sentence embeddings, a sigmoid-smoothed length
similarity, and the base-2 entropy of its label distribution.  Each metric
is divided by its pool-wide maximum and the three are combined as a
weighted sum; the k highest-scoring candidates seed the prompt.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

from .corpus import CorpusSplit, LabelScheme, TaggedSentence
from .embedder import DEFAULT_PROVIDER_ID, EmbeddingCache, cosine_similarity, embed_cached
from .errors import NormalizationError, SchemeViolationError

logger = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_SLS_TEMPERATURE = 3.0

# Task presets for (w1, w2, w3) = (length, entropy, similarity) weights.
PRESET_WEIGHTS: dict[str, tuple[float, float, float]] = {
    "ner": (0.25, 0.25, 0.5),
    "chunk": (0.2, 0.1, 0.7),
    "pos": (0.1, 0.1, 0.8),
}

EXAMPLE_ORDERS = ("descending", "ascending", "shuffled")


@dataclass(frozen=True)
class SelectionConfig:
    """Weights and knobs controlling example selection.

    w1 scales normalized length similarity, w2 normalized label entropy,
    w3 normalized sentence similarity.  Weights need not sum to one.
    """

    w1: float = 0.25
    w2: float = 0.25
    w3: float = 0.5
    k: int = DEFAULT_K
    T: float = DEFAULT_SLS_TEMPERATURE
    provider_id: str = DEFAULT_PROVIDER_ID
    exclude_duplicates: bool = False
    example_order: str = "descending"
    seed: int = 0
    static_example_ids: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("weights must be nonnegative")
        if self.w1 + self.w2 + self.w3 <= 0:
            raise ValueError("at least one weight must be positive")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.T <= 0:
            raise ValueError(f"temperature must be positive, got {self.T}")
        if self.example_order not in EXAMPLE_ORDERS:
            raise ValueError(f"example_order must be one of {EXAMPLE_ORDERS}")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)

    @classmethod
    def for_task(cls, task: str, **overrides) -> "SelectionConfig":
        """Preset weights for ner/chunk/pos, overridable field by field."""
        w1, w2, w3 = PRESET_WEIGHTS[task]
        base = {"w1": w1, "w2": w2, "w3": w3}
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class CandidateScore:
    """All raw and normalized metrics for one pool candidate."""

    candidate_id: int
    raw_sim: float
    raw_sls: float
    raw_entropy: float
    norm_sim: float
    norm_sls: float
    norm_entropy: float
    complexity: float


def smoothed_length_similarity(len_a: int, len_b: int, T: float = DEFAULT_SLS_TEMPERATURE) -> float:
    """Sigmoid-tapered similarity of two token counts: 1/(1 + e^(|a-b|/T)).

    Equal lengths give exactly 0.5; the score decays smoothly toward 0 as
    the absolute difference grows, with T controlling the taper.
    """
    if len_a < 1 or len_b < 1:
        raise ValueError("sentence lengths must be >= 1")
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    try:
        return 1.0 / (1.0 + math.exp(abs(len_a - len_b) / T))
    except OverflowError:
        return 0.0


def label_entropy(labels: Sequence[str], scheme: LabelScheme) -> float:
    """Base-2 Shannon entropy of the sentence's empirical label distribution.

    Frequencies are relative to the sentence length; labels that never occur
    contribute nothing.  All-one-label sentences score exactly 0.
    """
    if not labels:
        raise ValueError("cannot take the entropy of an empty label list")
    unknown = [l for l in labels if l not in scheme]
    if unknown:
        raise SchemeViolationError(f"labels not in the {scheme.task} scheme: {sorted(set(unknown))}")
    n = len(labels)
    total = 0.0
    for count in Counter(labels).values():
        p = count / n
        total += p * math.log2(p)
    return -total if total else 0.0


def normalize(scores: Sequence[float]) -> list[float]:
    """Divide every score by the list maximum, mapping the max to 1.0.

    Positive scaling preserves order.  A nonpositive maximum would flip the
    ranking, so it is an error rather than a silent pass-through.
    """
    if not scores:
        raise ValueError("cannot normalize an empty list")
    top = max(scores)
    if top <= 0:
        raise NormalizationError(f"pool maximum must be positive, got {top}")
    return [s / top for s in scores]


def complexity_score(
    norm_sls: float, norm_entropy: float, norm_sim: float, cfg: SelectionConfig
) -> float:
    """Weighted sum of the three normalized metrics."""
    return cfg.w1 * norm_sls + cfg.w2 * norm_entropy + cfg.w3 * norm_sim


def score_pool(
    test: TaggedSentence,
    pool: CorpusSplit,
    cfg: SelectionConfig,
    embeddings: EmbeddingCache,
) -> list[CandidateScore]:
    """Score every pool sentence against one test sentence.

    All embeddings must already be cached under cfg.provider_id.  Each
    metric is normalized over the candidate pool: similarity and length
    similarity therefore depend on the test sentence, entropy does not.
    """
    candidates = [
        s for s in pool
        if not (cfg.exclude_duplicates and s.tokens == test.tokens)
    ]
    if not candidates:
        raise ValueError("candidate pool is empty")

    test_vec = embed_cached(test, cfg.provider_id, embeddings)
    raw_sim = [
        cosine_similarity(embed_cached(s, cfg.provider_id, embeddings), test_vec)
        for s in candidates
    ]
    raw_sls = [smoothed_length_similarity(len(s), len(test), cfg.T) for s in candidates]
    raw_entropy = [label_entropy(s.labels, pool.scheme) for s in candidates]

    norm_sim = normalize(raw_sim)
    norm_sls = normalize(raw_sls)
    norm_entropy = normalize(raw_entropy)

    return [
        CandidateScore(
            candidate_id=s.id,
            raw_sim=raw_sim[i],
            raw_sls=raw_sls[i],
            raw_entropy=raw_entropy[i],
            norm_sim=norm_sim[i],
            norm_sls=norm_sls[i],
            norm_entropy=norm_entropy[i],
            complexity=complexity_score(norm_sls[i], norm_entropy[i], norm_sim[i], cfg),
        )
        for i, s in enumerate(candidates)
    ]


def select_top_k(scores: Sequence[CandidateScore], k: int) -> list[int]:
    """Ids of the k largest complexity scores, descending.

    Ties break toward the smaller candidate id so selection is
    deterministic.  A pool smaller than k returns everything, with a
    warning.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(scores) < k:
        logger.warning("asked for top %d of a pool of %d; returning all", k, len(scores))
    ranked = sorted(scores, key=lambda c: (-c.complexity, c.candidate_id))
    return [c.candidate_id for c in ranked[:k]]


def write_score_dump(fh: IO[str], test_id: int, scores: Sequence[CandidateScore]) -> None:
    """Append one JSON line per (test_id, candidate) with every score field."""
    for c in scores:
        fh.write(json.dumps({"test_id": test_id, **asdict(c)}) + "\n")
