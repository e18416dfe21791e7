"""Word-by-word structured decoding and whole-split task runs.

Decoding appends one test token at a time to the prompt, asks the model
for its label, repairs anything outside the scheme, and feeds the repaired
label back before the next token.  A task run does this for every test
sentence after selecting its examples.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterator, NamedTuple, Sequence

from .corpus import CorpusSplit, LabelScheme, TaggedSentence
from .embedder import EmbeddingCache
from .errors import ConfigError, CPRetrievalError
from .plm_client import CompletionClient, CompletionRequest
from .prompting import RenderedPrompt, order_examples, render_prompt, write_prompt
from .scoring import SelectionConfig, score_pool, select_top_k, write_score_dump

logger = logging.getLogger(__name__)

STRATEGIES = ("cp", "knn", "static")


@dataclass(frozen=True)
class Repair:
    position: int
    raw: str
    label: str


@dataclass(frozen=True)
class PredictionRow:
    """Predictions and provenance for one decoded test sentence."""

    test_id: int
    tokens: tuple[str, ...]
    gold: tuple[str, ...]
    predicted: tuple[str, ...]
    example_ids: tuple[int, ...]
    prompt_hash: str
    repairs: tuple[Repair, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "test_id": self.test_id,
                "tokens": list(self.tokens),
                "gold": list(self.gold),
                "predicted": list(self.predicted),
                "example_ids": list(self.example_ids),
                "prompt_hash": self.prompt_hash,
                "repairs": [
                    {"position": r.position, "raw": r.raw, "label": r.label}
                    for r in self.repairs
                ],
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "PredictionRow":
        rec = json.loads(line)
        return cls(
            test_id=rec["test_id"],
            tokens=tuple(rec["tokens"]),
            gold=tuple(rec["gold"]),
            predicted=tuple(rec["predicted"]),
            example_ids=tuple(rec["example_ids"]),
            prompt_hash=rec["prompt_hash"],
            repairs=tuple(
                Repair(r["position"], r["raw"], r["label"]) for r in rec["repairs"]
            ),
        )


class PredictionSet:
    """Ordered prediction rows for one run, with JSON-lines persistence."""

    def __init__(self, rows: Sequence[PredictionRow] = ()):
        self.rows: list[PredictionRow] = list(rows)
        self.failures: list[tuple[int, str]] = []

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[PredictionRow]:
        return iter(self.rows)

    def by_test_id(self) -> dict[int, PredictionRow]:
        return {r.test_id: r for r in self.rows}

    def write_jsonl(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for row in self.rows:
                fh.write(row.to_json() + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "PredictionSet":
        rows = []
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(PredictionRow.from_json(line))
        return cls(rows)


def _fallback_label(scheme: LabelScheme) -> str:
    if "O" in scheme:
        return "O"
    if "NOUN" in scheme:  # majority tag for part-of-speech schemes
        return "NOUN"
    return scheme.labels[0]


def _common_prefix_len(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def repair_label(raw: str, scheme: LabelScheme) -> tuple[str, bool]:
    """Map a raw completion unit onto the scheme.

    Exact match passes through; a case-insensitive match returns the
    canonical label; otherwise the scheme label sharing the longest common
    prefix wins.  No usable prefix, or a tie, falls back to the scheme's
    outside/majority label.  Returns (label, was_repaired).
    """
    if raw in scheme:
        return raw, False
    lowered = raw.lower()
    for label in scheme.labels:
        if label.lower() == lowered:
            return label, True
    best_len = 0
    best: list[str] = []
    for label in scheme.labels:
        n = _common_prefix_len(raw, label)
        if n > best_len:
            best_len, best = n, [label]
        elif n == best_len and n > 0:
            best.append(label)
    if best_len > 0 and len(best) == 1:
        return best[0], True
    return _fallback_label(scheme), True


class DecodeOutcome(NamedTuple):
    labels: list[str]
    repairs: list[Repair]


def decode_sentence(
    prompt: RenderedPrompt,
    test: TaggedSentence,
    client: CompletionClient,
    scheme: LabelScheme,
    max_tokens: int = 8,
) -> DecodeOutcome:
    """Label one test sentence token by token.

    Each step extends the working text with "token_", requests a
    completion (stop = single space), keeps the first whitespace-delimited
    unit, repairs it into the scheme, and feeds it back.  The result always
    has exactly one in-scheme label per token.
    """
    text = prompt.text
    labels: list[str] = []
    repairs: list[Repair] = []
    for i, token in enumerate(test.tokens):
        text += f"{token}_" if text.endswith(" ") else f" {token}_"
        response = client.complete(
            CompletionRequest(prompt=text, max_tokens=max_tokens, stop=(" ",))
        )
        units = response.text.split()
        raw = units[0] if units else ""
        label, repaired = repair_label(raw, scheme)
        if repaired:
            repairs.append(Repair(i, raw, label))
            logger.debug("sentence %d pos %d: repaired %r -> %r", test.id, i, raw, label)
        labels.append(label)
        text += label
    return DecodeOutcome(labels, repairs)


def _select_ids(
    test: TaggedSentence,
    pool: CorpusSplit,
    cfg: SelectionConfig,
    strategy: str,
    cache: EmbeddingCache | None,
    score_dump: IO[str] | None = None,
) -> list[int]:
    if strategy == "static":
        if not cfg.static_example_ids:
            raise ConfigError("static strategy needs static_example_ids in the config")
        return list(cfg.static_example_ids)
    if cache is None:
        raise ConfigError(f"strategy {strategy!r} needs an embedding cache")
    if strategy == "knn":  # nearest-neighbor baseline: similarity only
        cfg = replace(cfg, w1=0.0, w2=0.0, w3=1.0)
    scores = score_pool(test, pool, cfg, cache)
    if score_dump is not None:
        write_score_dump(score_dump, test.id, scores)
    return select_top_k(scores, cfg.k)


def run_task(
    test_split: CorpusSplit,
    pool: CorpusSplit,
    cfg: SelectionConfig,
    strategy: str,
    client: CompletionClient,
    cache: EmbeddingCache | None = None,
    jobs: int = 1,
    resume: PredictionSet | None = None,
    prompt_dir: str | Path | None = None,
    score_dump: IO[str] | None = None,
    completion_separator: str = "",
) -> PredictionSet:
    """Select, render, and decode every sentence of a test split.

    Sentences fail independently: an error is recorded and skipped, never
    fatal.  With `resume`, sentences whose prompt hash matches an existing
    row are reused verbatim.  Distinct sentences may decode concurrently
    (`jobs`); within a sentence, steps are inherently sequential.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if strategy == "static" and not cfg.static_example_ids:
        raise ConfigError("static strategy needs static_example_ids in the config")
    if strategy != "static" and cache is None:
        raise ConfigError(f"strategy {strategy!r} needs an embedding cache")
    scheme = pool.scheme
    done = resume.by_test_id() if resume is not None else {}

    def handle(test: TaggedSentence) -> PredictionRow | None:
        ids = _select_ids(test, pool, cfg, strategy, cache, score_dump)
        ids = order_examples(ids, cfg.example_order, cfg.seed, test.id)
        prompt = render_prompt(
            [pool[i] for i in ids], test, scheme,
            completion_separator=completion_separator,
        )
        if prompt_dir is not None:
            write_prompt(prompt, prompt_dir)
        previous = done.get(test.id)
        if previous is not None and previous.prompt_hash == prompt.hash:
            return previous
        labels, repairs = decode_sentence(prompt, test, client, scheme)
        return PredictionRow(
            test_id=test.id,
            tokens=test.tokens,
            gold=test.labels,
            predicted=tuple(labels),
            example_ids=tuple(ids),
            prompt_hash=prompt.hash,
            repairs=tuple(repairs),
        )

    predictions = PredictionSet()

    def guarded(test: TaggedSentence) -> PredictionRow | None:
        try:
            return handle(test)
        except CPRetrievalError as exc:
            logger.error("sentence %d failed: %s", test.id, exc)
            predictions.failures.append((test.id, str(exc)))
            return None

    if jobs <= 1:
        results = [guarded(t) for t in test_split]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(guarded, test_split))
    predictions.rows.extend(r for r in results if r is not None)
    return predictions
