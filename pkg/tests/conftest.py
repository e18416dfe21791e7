"""Shared synthetic corpora, a local completion server, and fixtures."""

from __future__ import annotations

import json
import random
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from cpretrieval.corpus import CorpusSplit, TaggedSentence, scheme_for_task

FILLER = (
    "market", "bonds", "closed", "higher", "lower", "trading", "quiet",
    "prices", "rose", "fell", "early", "gains", "losses", "shares", "index",
    "dealers", "said", "on", "the", "in", "a", "after", "before", "while",
    "contract", "futures", "yield", "percent", "points", "activity",
)

ENTITIES = {
    "PER": [("alice",), ("james", "lee"), ("maria", "gonzalez"), ("chen",)],
    "ORG": [("acme",), ("global", "traders"), ("nordbank",), ("unity", "press")],
    "LOC": [("london",), ("osaka",), ("new", "york"), ("geneva",)],
    "MISC": [("dutch",), ("olympic",), ("swiss",)],
}

UPOS_BY_ROLE = {
    "noun": "NOUN", "verb": "VERB", "adj": "ADJ", "adp": "ADP",
    "det": "DET", "punct": "PUNCT", "adv": "ADV", "pron": "PRON",
}


def make_ner_sentence(rng: random.Random, sent_id: int, min_len=4, max_len=16,
                      entity_prob=0.75) -> TaggedSentence:
    tokens: list[str] = []
    labels: list[str] = []
    n_fill = rng.randint(min_len, max_len)
    tokens.extend(rng.choice(FILLER) for _ in range(n_fill))
    labels.extend("O" for _ in range(n_fill))
    if rng.random() < entity_prob:
        for _ in range(rng.randint(1, 2)):
            kind = rng.choice(sorted(ENTITIES))
            surface = rng.choice(ENTITIES[kind])
            at = rng.randint(0, len(tokens))
            tokens[at:at] = list(surface)
            labels[at:at] = ["B-" + kind] + ["I-" + kind] * (len(surface) - 1)
    return TaggedSentence(sent_id, tuple(tokens), tuple(labels))


def make_ner_corpus(n: int, seed: int = 0, name: str = "train", **kw) -> CorpusSplit:
    """Unique-token-sequence NER corpus; at least one entity is guaranteed."""
    rng = random.Random(seed)
    sentences: list[TaggedSentence] = []
    seen: set[tuple[str, ...]] = set()
    while len(sentences) < n:
        s = make_ner_sentence(rng, len(sentences), **kw)
        if s.tokens in seen:
            continue
        seen.add(s.tokens)
        sentences.append(s)
    if all(set(s.labels) == {"O"} for s in sentences):
        fixed = make_ner_sentence(rng, 0, entity_prob=1.0)
        sentences[0] = TaggedSentence(0, fixed.tokens, fixed.labels)
    return CorpusSplit(name, tuple(sentences), scheme_for_task("ner"))


def make_pos_sentence(rng: random.Random, sent_id: int, min_len=4, max_len=16) -> TaggedSentence:
    upos = list(UPOS_BY_ROLE.values())
    n = rng.randint(min_len, max_len)
    tokens = tuple(rng.choice(FILLER) for _ in range(n))
    labels = tuple(rng.choice(upos) for _ in range(n))
    return TaggedSentence(sent_id, tokens, labels)


def make_pos_corpus(n: int, seed: int = 0, name: str = "train", **kw) -> CorpusSplit:
    rng = random.Random(seed)
    sentences: list[TaggedSentence] = []
    seen: set[tuple[str, ...]] = set()
    while len(sentences) < n:
        s = make_pos_sentence(rng, len(sentences), **kw)
        if s.tokens in seen:
            continue
        seen.add(s.tokens)
        sentences.append(s)
    return CorpusSplit(name, tuple(sentences), scheme_for_task("pos"))


class _CompletionHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        status, payload = self.server.respond(body)  # type: ignore[attr-defined]
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output clean
        pass


class CompletionServer(ThreadingHTTPServer):
    """Local endpoint speaking the completion wire protocol.

    `complete_fn(prompt) -> text` supplies the continuation; `stop` and
    `max_tokens` from the request are honored.  A queue of status codes can
    be preloaded to simulate transient failures.
    """

    def __init__(self, complete_fn, fail_statuses=()):
        super().__init__(("127.0.0.1", 0), _CompletionHandler)
        self.complete_fn = complete_fn
        self.fail_statuses = deque(fail_statuses)
        self.requests_seen = []
        self._lock = threading.Lock()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}/complete"

    def respond(self, body):
        with self._lock:
            self.requests_seen.append(body)
            if self.fail_statuses:
                return self.fail_statuses.popleft(), {"error": "synthetic failure"}
        if "prompt" in body:
            prompt = body["prompt"]
        else:
            prompt = body["messages"][0]["content"]
        text = self.complete_fn(prompt)
        finish = "stop"
        for stop in body.get("stop", []):
            if stop in text:
                text = text[: text.index(stop)]
        units = text.split(" ")
        if len(units) > body.get("max_tokens", 16):
            text = " ".join(units[: body["max_tokens"]])
            finish = "length"
        return 200, {"text": text, "finish_reason": finish}


class EmbeddingServer(ThreadingHTTPServer):
    """Local endpoint speaking the embedding wire protocol.

    `embed_fn(text) -> list[float]` supplies one vector per input text.
    """

    def __init__(self, embed_fn, fail_statuses=()):
        super().__init__(("127.0.0.1", 0), _CompletionHandler)
        self.embed_fn = embed_fn
        self.fail_statuses = deque(fail_statuses)
        self.requests_seen = []
        self._lock = threading.Lock()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}/embed"

    def respond(self, body):
        with self._lock:
            self.requests_seen.append(body)
            if self.fail_statuses:
                return self.fail_statuses.popleft(), {"error": "synthetic failure"}
        return 200, {"vectors": [self.embed_fn(t) for t in body["texts"]]}


def _serve_forever(server, registry):
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    registry.append(server)
    return server


@pytest.fixture
def completion_server():
    """Factory fixture: start oracle-style HTTP servers, torn down at exit."""
    servers = []
    yield lambda complete_fn, fail_statuses=(): _serve_forever(
        CompletionServer(complete_fn, fail_statuses), servers
    )
    for server in servers:
        server.shutdown()
        server.server_close()


@pytest.fixture
def embedding_server():
    """Factory fixture for local embedding endpoints."""
    servers = []
    yield lambda embed_fn, fail_statuses=(): _serve_forever(
        EmbeddingServer(embed_fn, fail_statuses), servers
    )
    for server in servers:
        server.shutdown()
        server.server_close()


@pytest.fixture
def ner_scheme():
    return scheme_for_task("ner")


@pytest.fixture
def pos_scheme():
    return scheme_for_task("pos")


@pytest.fixture
def chunk_scheme():
    return scheme_for_task("chunk")
