"""Sequence-tagging metrics: span-level micro-F1 and token accuracy.

Span extraction follows the CoNLL shared-task scorer conventions,
including the lenient reading where an I-X with no live X span starts one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .corpus import CorpusSplit
from .decoder import PredictionSet
from .errors import AlignmentError

Span = tuple[int, int, str]  # [start, end) and type


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level scores plus a per-label tp/fp/fn breakdown."""

    task: str
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    per_label: dict[str, tuple[int, int, int]]
    n_sentences: int
    n_tokens: int

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "per_label": {k: list(v) for k, v in sorted(self.per_label.items())},
            "n_sentences": self.n_sentences,
            "n_tokens": self.n_tokens,
        }
        return json.dumps(payload, indent=2)

    def format_table(self) -> str:
        lines = [f"task: {self.task}   sentences: {self.n_sentences}   tokens: {self.n_tokens}"]
        if self.f1 is not None:
            lines.append(
                f"precision: {self.precision:.4f}   recall: {self.recall:.4f}   f1: {self.f1:.4f}"
            )
        if self.accuracy is not None:
            lines.append(f"accuracy: {self.accuracy:.4f}")
        if self.per_label:
            width = max(len(l) for l in self.per_label)
            lines.append(f"{'label'.ljust(width)}  {'tp':>6} {'fp':>6} {'fn':>6}")
            for label, (tp, fp, fn) in sorted(self.per_label.items()):
                lines.append(f"{label.ljust(width)}  {tp:>6} {fp:>6} {fn:>6}")
        return "\n".join(lines)


def extract_spans(labels: Sequence[str]) -> set[Span]:
    """Maximal typed spans from a BIO sequence.

    A span opens at B-X, or at I-X when no X span is live; it closes before
    the first label that does not continue it.  End offsets are exclusive.
    """
    spans: set[Span] = set()
    start = 0
    current: str | None = None
    for i, label in enumerate(labels):
        if label == "O":
            if current is not None:
                spans.add((start, i, current))
                current = None
            continue
        prefix, _, kind = label.partition("-")
        if prefix not in ("B", "I") or not kind:
            raise ValueError(f"not a BIO label: {label!r}")
        if prefix == "B" or current != kind:
            if current is not None:
                spans.add((start, i, current))
            start, current = i, kind
    if current is not None:
        spans.add((start, len(labels), current))
    return spans


def _aligned_pairs(pred: PredictionSet, gold: CorpusSplit):
    for row in pred:
        if row.test_id < 0 or row.test_id >= len(gold):
            raise AlignmentError(f"prediction for unknown test_id {row.test_id}")
        sentence = gold[row.test_id]
        if row.tokens != sentence.tokens:
            raise AlignmentError(f"test_id {row.test_id}: prediction tokens differ from gold")
        if len(row.predicted) != len(sentence.tokens):
            raise AlignmentError(
                f"test_id {row.test_id}: {len(row.predicted)} labels for "
                f"{len(sentence.tokens)} tokens"
            )
        yield row, sentence


def micro_f1(pred: PredictionSet, gold: CorpusSplit) -> EvalReport:
    """Micro-averaged span F1: exact (start, end, type) matches count."""
    tp = fp = fn = 0
    per_label: dict[str, list[int]] = {}
    n_sentences = n_tokens = 0
    for row, sentence in _aligned_pairs(pred, gold):
        n_sentences += 1
        n_tokens += len(sentence)
        gold_spans = extract_spans(sentence.labels)
        pred_spans = extract_spans(row.predicted)
        for span in pred_spans & gold_spans:
            per_label.setdefault(span[2], [0, 0, 0])[0] += 1
            tp += 1
        for span in pred_spans - gold_spans:
            per_label.setdefault(span[2], [0, 0, 0])[1] += 1
            fp += 1
        for span in gold_spans - pred_spans:
            per_label.setdefault(span[2], [0, 0, 0])[2] += 1
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(
        task=gold.scheme.task,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=None,
        per_label={k: tuple(v) for k, v in per_label.items()},
        n_sentences=n_sentences,
        n_tokens=n_tokens,
    )


def token_accuracy(pred: PredictionSet, gold: CorpusSplit) -> EvalReport:
    """Fraction of tokens whose predicted label equals the gold label."""
    correct = total = 0
    per_label: dict[str, list[int]] = {}
    n_sentences = 0
    for row, sentence in _aligned_pairs(pred, gold):
        n_sentences += 1
        for p, g in zip(row.predicted, sentence.labels):
            total += 1
            if p == g:
                correct += 1
                per_label.setdefault(g, [0, 0, 0])[0] += 1
            else:
                per_label.setdefault(p, [0, 0, 0])[1] += 1
                per_label.setdefault(g, [0, 0, 0])[2] += 1
    return EvalReport(
        task=gold.scheme.task,
        precision=None,
        recall=None,
        f1=None,
        accuracy=correct / total if total else 0.0,
        per_label={k: tuple(v) for k, v in per_label.items()},
        n_sentences=n_sentences,
        n_tokens=total,
    )


def mismatched_sentences(pred: PredictionSet, gold: CorpusSplit) -> list[int]:
    """Test ids whose prediction is not exactly the gold labeling."""
    return [
        row.test_id
        for row, sentence in _aligned_pairs(pred, gold)
        if row.predicted != sentence.labels
    ]


def evaluate(pred: PredictionSet, gold: CorpusSplit) -> EvalReport:
    """Dispatch on the scheme: span F1 for BIO tasks, accuracy otherwise."""
    if gold.scheme.scheme_kind == "bio":
        return micro_f1(pred, gold)
    return token_accuracy(pred, gold)
