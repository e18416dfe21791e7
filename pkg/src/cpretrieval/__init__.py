"""Complexity-based example retrieval for few-shot sequence tagging.

The pipeline scores every training sentence against a test sentence with
three normalized metrics (embedding cosine similarity, sigmoid-smoothed
length similarity, label entropy), selects the top-k as demonstrations,
renders a Context/Tagged prompt, decodes labels word by word through a
pluggable completion client, and evaluates with span F1 or token accuracy.
"""

from .corpus import (
    CorpusSplit,
    LabelScheme,
    TaggedSentence,
    bio_violations,
    parse_conll,
    parse_conllu,
    repair_bio,
    sample_test_subset,
    scheme_for_task,
    serialize_conll,
    serialize_conllu,
    to_jsonl,
)
from .decoder import PredictionRow, PredictionSet, decode_sentence, repair_label, run_task
from .embedder import (
    EmbeddingCache,
    EmbeddingVector,
    HashEmbedder,
    RemoteEmbeddingProvider,
    cosine_similarity,
    embed,
    hash_embed,
    warm_cache,
)
from .evaluation import EvalReport, evaluate, extract_spans, micro_f1, token_accuracy
from .plm_client import (
    CompletionRequest,
    CompletionResponse,
    OraclePLMClient,
    RateLimiter,
    RecordingClient,
    RemotePLMClient,
    ReplayClient,
    oracle_complete,
)
from .prompting import RenderedPrompt, order_examples, parse_tagged_line, render_prompt
from .scoring import (
    CandidateScore,
    SelectionConfig,
    complexity_score,
    label_entropy,
    normalize,
    score_pool,
    select_top_k,
    smoothed_length_similarity,
)
from .tuner import GridSearchResult, enumerate_simplex, grid_search

__version__ = "0.1.0"

__all__ = [
    "CandidateScore",
    "CompletionRequest",
    "CompletionResponse",
    "CorpusSplit",
    "EmbeddingCache",
    "EmbeddingVector",
    "EvalReport",
    "GridSearchResult",
    "HashEmbedder",
    "LabelScheme",
    "OraclePLMClient",
    "PredictionRow",
    "PredictionSet",
    "RateLimiter",
    "RecordingClient",
    "RemoteEmbeddingProvider",
    "RemotePLMClient",
    "RenderedPrompt",
    "ReplayClient",
    "SelectionConfig",
    "TaggedSentence",
    "bio_violations",
    "complexity_score",
    "cosine_similarity",
    "decode_sentence",
    "embed",
    "enumerate_simplex",
    "evaluate",
    "extract_spans",
    "grid_search",
    "hash_embed",
    "label_entropy",
    "micro_f1",
    "normalize",
    "oracle_complete",
    "order_examples",
    "parse_conll",
    "parse_conllu",
    "parse_tagged_line",
    "render_prompt",
    "repair_bio",
    "repair_label",
    "run_task",
    "sample_test_subset",
    "scheme_for_task",
    "score_pool",
    "select_top_k",
    "serialize_conll",
    "serialize_conllu",
    "smoothed_length_similarity",
    "to_jsonl",
    "token_accuracy",
    "warm_cache",
]
