"""Rendering of k-shot Context/Tagged prompts and their inverse parser.

Each demonstration is two lines: the raw sentence after "Context: " and
the token_LABEL pairs after "Tagged: ".  The test sentence closes the
prompt with a bare "Tagged:" for the model to continue.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .corpus import LabelScheme, TaggedSentence
from .errors import PromptFormatError, ValidationError

CONTEXT_PREFIX = "Context:"
TAGGED_PREFIX = "Tagged:"

DELIMITERS = ("_", " ", "\t", "\n")


class RenderError(ValidationError):
    """A sentence cannot be rendered without corrupting the scaffold."""


@dataclass(frozen=True)
class RenderedPrompt:
    """A finished prompt plus the provenance needed to audit it."""

    text: str
    example_ids: tuple[int, ...]
    test_id: int
    scheme: LabelScheme | None = None

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def _checked_tokens(sentence: TaggedSentence) -> tuple[str, ...]:
    for token in sentence.tokens:
        if any(d in token for d in DELIMITERS):
            raise RenderError(
                f"token {token!r} in sentence {sentence.id} contains a "
                "delimiter character; ingest should have rejected it"
            )
    return sentence.tokens


def render_example(sentence: TaggedSentence) -> str:
    """One demonstration block: Context line plus fully tagged line."""
    tokens = _checked_tokens(sentence)
    tagged = " ".join(f"{t}_{l}" for t, l in zip(tokens, sentence.labels))
    return f"{CONTEXT_PREFIX} {' '.join(tokens)}\n{TAGGED_PREFIX} {tagged}\n"


def render_prompt(
    examples: Sequence[TaggedSentence],
    test: TaggedSentence,
    scheme: LabelScheme | None = None,
    completion_separator: str = "",
) -> RenderedPrompt:
    """Assemble the k-shot prompt for one test sentence.

    Examples appear in the order given (the selector emits them highest
    score first).  By default the prompt ends with "Tagged:" and no
    trailing space — the completion continues on the same line; endpoints
    that want a separating space can ask for completion_separator=" ".
    """
    if completion_separator not in ("", " "):
        raise ValueError('completion_separator must be "" or " "')
    if not examples:
        raise ValueError("a prompt needs at least one example")
    blocks = [render_example(e) for e in examples]
    blocks.append(
        f"{CONTEXT_PREFIX} {' '.join(_checked_tokens(test))}"
        f"\n{TAGGED_PREFIX}{completion_separator}"
    )
    return RenderedPrompt(
        text="".join(blocks),
        example_ids=tuple(e.id for e in examples),
        test_id=test.id,
        scheme=scheme,
    )


class ParsedTaggedLine(NamedTuple):
    tokens: list[str]
    labels: list[str]
    violations: list[tuple[int, str]]  # (position, offending unit)


def parse_tagged_line(line: str, scheme: LabelScheme) -> ParsedTaggedLine:
    """Split a "token_LABEL token_LABEL ..." line back into two sequences.

    Units split at their LAST underscore, so tokens may not contain one but
    labels never do.  Unknown labels are replaced by the scheme's outside
    sentinel and reported as violations instead of failing the line.
    """
    tokens: list[str] = []
    labels: list[str] = []
    violations: list[tuple[int, str]] = []
    for i, unit in enumerate(line.split()):
        token, sep, label = unit.rpartition("_")
        if not sep or not token:
            raise PromptFormatError(f"unit {unit!r} is not of the form token_LABEL")
        tokens.append(token)
        if label in scheme:
            labels.append(label)
        else:
            labels.append(scheme.outside_label)
            violations.append((i, unit))
    return ParsedTaggedLine(tokens, labels, violations)


def order_examples(
    ids: Sequence[int], policy: str, seed: int, test_id: int
) -> list[int]:
    """Reorder selected ids for the prompt; input is descending by score."""
    out = list(ids)
    if policy == "descending":
        return out
    if policy == "ascending":
        return out[::-1]
    if policy == "shuffled":
        random.Random(f"{seed}:{test_id}").shuffle(out)
        return out
    raise ValueError(f"unknown example order {policy!r}")


def write_prompt(prompt: RenderedPrompt, directory: str | Path) -> Path:
    """Export the prompt byte-exactly, one file per test sentence."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{prompt.test_id}.txt"
    path.write_bytes(prompt.text.encode("utf-8"))
    return path
