"""Parsing, validation, and serving of pre-tokenized tagging corpora.

Two input formats are supported: blank-line-separated column files (CoNLL
2003 NER, CoNLL 2000 chunking) and CoNLL-U treebanks (UPOS tagging).
Parsed splits are immutable and safe to share between threads.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterator

from .errors import ConfigError, ParseError, SchemeViolationError

logger = logging.getLogger(__name__)

DOCSTART = "-DOCSTART-"

# Seed used when carving out a fixed-size evaluation subset, unless the
# caller overrides it.  Published subsets do not document their sampling,
# so this constant only pins *our* runs to a reproducible choice.
DEFAULT_SAMPLE_SEED = 20003

NER_LABELS = (
    "O",
    "B-PER", "I-PER",
    "B-ORG", "I-ORG",
    "B-LOC", "I-LOC",
    "B-MISC", "I-MISC",
)

CHUNK_TYPES = ("NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "PRT", "INTJ", "CONJP", "LST", "UCP")

UPOS_LABELS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)


@dataclass(frozen=True)
class LabelScheme:
    """Closed label vocabulary for one tagging task."""

    task: str
    labels: tuple[str, ...]
    scheme_kind: str  # "bio" or "flat"

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("label scheme needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label scheme contains duplicates")
        if self.scheme_kind == "bio":
            if "O" not in self.labels:
                raise ValueError('BIO scheme must contain "O"')
            bad = [l for l in self.labels if l != "O" and not l.startswith(("B-", "I-"))]
            if bad:
                raise ValueError(f"labels not in BIO form: {bad}")
        elif self.scheme_kind != "flat":
            raise ValueError(f"unknown scheme kind {self.scheme_kind!r}")

    @cached_property
    def _label_set(self) -> frozenset[str]:
        return frozenset(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._label_set

    @property
    def outside_label(self) -> str:
        """Sentinel used when an out-of-scheme label has to be replaced."""
        if "O" in self._label_set:
            return "O"
        if "X" in self._label_set:
            return "X"
        return self.labels[0]


def scheme_for_task(task: str) -> LabelScheme:
    """Return the shipped label inventory for ner, chunk, or pos."""
    if task == "ner":
        return LabelScheme("ner", NER_LABELS, "bio")
    if task == "chunk":
        labels = ("O",) + tuple(f"{p}-{t}" for t in CHUNK_TYPES for p in ("B", "I"))
        return LabelScheme("chunk", labels, "bio")
    if task == "pos":
        return LabelScheme("pos", UPOS_LABELS, "flat")
    raise ConfigError(f"unknown task {task!r}; expected ner, chunk, or pos")


@dataclass(frozen=True)
class TaggedSentence:
    """One token sequence with its aligned label sequence."""

    id: int
    tokens: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise ValueError("sentence must contain at least one token")
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class CorpusSplit:
    """An ordered, immutable collection of tagged sentences."""

    name: str
    sentences: tuple[TaggedSentence, ...]
    scheme: LabelScheme

    def __post_init__(self) -> None:
        ids = [s.id for s in self.sentences]
        if ids != list(range(len(ids))):
            raise ValueError("sentence ids must be dense 0..n-1 in order")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[TaggedSentence]:
        return iter(self.sentences)

    def __getitem__(self, sentence_id: int) -> TaggedSentence:
        return self.sentences[sentence_id]

    def label_counts(self) -> Counter:
        counts: Counter = Counter()
        for s in self.sentences:
            counts.update(s.labels)
        return counts

    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def bio_violations(labels: tuple[str, ...] | list[str]) -> list[int]:
    """Positions whose I-X label does not continue a B-X or I-X run."""
    bad = []
    prev = "O"
    for i, lab in enumerate(labels):
        if lab.startswith("I-"):
            kind = lab[2:]
            if prev != "B-" + kind and prev != "I-" + kind:
                bad.append(i)
        prev = lab
    return bad


def repair_bio(labels: tuple[str, ...] | list[str]) -> tuple[tuple[str, ...], int]:
    """Rewrite dangling I-X labels as B-X, left to right.

    Returns the repaired sequence and the number of rewrites.  Repairs
    cascade: once a dangling I-X becomes B-X, the following I-X is valid.
    """
    out = list(labels)
    prev = "O"
    repairs = 0
    for i, lab in enumerate(out):
        if lab.startswith("I-"):
            kind = lab[2:]
            if prev != "B-" + kind and prev != "I-" + kind:
                out[i] = "B-" + kind
                repairs += 1
        prev = out[i]
    return tuple(out), repairs


def _check_token(token: str, line_no: int) -> None:
    if not token:
        raise ParseError(f"line {line_no}: empty token")
    if "_" in token:
        raise ParseError(
            f"line {line_no}: token {token!r} contains an underscore, "
            "which is reserved as the prompt token/label delimiter"
        )


def _check_label(label: str, scheme: LabelScheme, line_no: int) -> None:
    if label not in scheme:
        raise SchemeViolationError(
            f"line {line_no}: label {label!r} is not in the {scheme.task} scheme"
        )


def _build_sentence(
    sent_id: int,
    tokens: list[str],
    labels: list[str],
    on_invalid_bio: str,
) -> TaggedSentence | None:
    """Apply the BIO validity policy; None means the sentence was rejected."""
    positions = bio_violations(labels)
    if positions:
        if on_invalid_bio == "reject":
            logger.warning(
                "rejecting sentence %d: invalid BIO transition at %s", sent_id, positions
            )
            return None
        repaired, n = repair_bio(labels)
        logger.warning("sentence %d: repaired %d invalid BIO transitions", sent_id, n)
        labels = list(repaired)
    return TaggedSentence(sent_id, tuple(tokens), tuple(labels))


def parse_conll(
    data: bytes | str,
    column: int,
    scheme: LabelScheme,
    name: str = "train",
    on_invalid_bio: str = "repair",
) -> CorpusSplit:
    """Parse a blank-line-separated column file.

    Tokens come from column 0 and labels from `column` (0-based).  All
    content lines must share the column count of the first one; document
    separator blocks are dropped.
    """
    if on_invalid_bio not in ("repair", "reject"):
        raise ConfigError(f"on_invalid_bio must be repair or reject, got {on_invalid_bio!r}")
    text = data.decode("utf-8") if isinstance(data, bytes) else data

    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    labels: list[str] = []
    n_columns: int | None = None
    checking = scheme.scheme_kind == "bio"

    def flush() -> None:
        if not tokens:
            return
        if tokens[0] == DOCSTART:
            tokens.clear()
            labels.clear()
            return
        built = (
            _build_sentence(len(sentences), tokens, labels, on_invalid_bio)
            if checking
            else TaggedSentence(len(sentences), tuple(tokens), tuple(labels))
        )
        if built is not None:
            sentences.append(built)
        tokens.clear()
        labels.clear()

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        fields = line.split()
        if n_columns is None:
            n_columns = len(fields)
            if column >= n_columns or column < 0:
                raise ParseError(
                    f"line {line_no}: tag column {column} out of range for "
                    f"{n_columns}-column input"
                )
        if len(fields) != n_columns:
            raise ParseError(
                f"line {line_no}: expected {n_columns} columns, got {len(fields)}"
            )
        token, label = fields[0], fields[column]
        if token != DOCSTART:
            _check_token(token, line_no)
            _check_label(label, scheme, line_no)
        tokens.append(token)
        labels.append(label)
    flush()
    return CorpusSplit(name, tuple(sentences), scheme)


def parse_conllu(
    data: bytes | str,
    scheme: LabelScheme | None = None,
    name: str = "train",
) -> CorpusSplit:
    """Parse a CoNLL-U file into a UPOS-labeled split.

    Tokens come from the FORM column and labels from UPOS.  Comment lines,
    multiword-token ranges (ids like "3-4"), and empty nodes (ids like
    "5.1") are skipped.
    """
    scheme = scheme or scheme_for_task("pos")
    text = data.decode("utf-8") if isinstance(data, bytes) else data

    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    labels: list[str] = []

    def flush() -> None:
        if tokens:
            sentences.append(TaggedSentence(len(sentences), tuple(tokens), tuple(labels)))
            tokens.clear()
            labels.clear()

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 10:
            raise ParseError(f"line {line_no}: expected 10 tab-separated columns, got {len(fields)}")
        word_id, form, upos = fields[0], fields[1], fields[3]
        if "-" in word_id or "." in word_id:
            continue  # multiword range / empty node
        if upos == "_":
            raise SchemeViolationError(f"line {line_no}: word line {form!r} is missing its UPOS tag")
        _check_token(form, line_no)
        _check_label(upos, scheme, line_no)
        tokens.append(form)
        labels.append(upos)
    flush()
    return CorpusSplit(name, tuple(sentences), scheme)


def serialize_conll(split: CorpusSplit) -> str:
    """Two-column canonical form: "token label" lines, blank-line separated."""
    blocks = [
        "\n".join(f"{t} {l}" for t, l in zip(s.tokens, s.labels))
        for s in split.sentences
    ]
    return "\n\n".join(blocks) + "\n"


def serialize_conllu(split: CorpusSplit) -> str:
    """Minimal 10-column CoNLL-U form carrying only FORM and UPOS."""
    lines = []
    for s in split.sentences:
        for i, (t, l) in enumerate(zip(s.tokens, s.labels), start=1):
            lines.append("\t".join([str(i), t, "_", l, "_", "_", "_", "_", "_", "_"]))
        lines.append("")
    return "\n".join(lines)


def to_jsonl(split: CorpusSplit) -> str:
    """One {"id", "tokens", "labels"} record per sentence."""
    return "".join(
        json.dumps({"id": s.id, "tokens": list(s.tokens), "labels": list(s.labels)}) + "\n"
        for s in split.sentences
    )


def sample_test_subset(split: CorpusSplit, n: int, seed: int = DEFAULT_SAMPLE_SEED) -> CorpusSplit:
    """Deterministic pseudo-random subset of size min(n, len(split)).

    The subset preserves the original sentence order and renumbers ids
    densely.  Asking for the whole split (or more) returns it unchanged.
    """
    if n < 1:
        raise ValueError(f"subset size must be >= 1, got {n}")
    if n >= len(split):
        if n > len(split):
            logger.warning(
                "requested %d sentences but split %s has only %d; returning all",
                n, split.name, len(split),
            )
        return split
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(split)), n))
    sentences = tuple(
        replace(split.sentences[j], id=i) for i, j in enumerate(picked)
    )
    return CorpusSplit(split.name, sentences, split.scheme)
