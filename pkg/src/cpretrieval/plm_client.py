"""Completion clients: a remote HTTP endpoint, record/replay fixtures, and
gold-label oracles for offline runs.

All clients share one call shape — `complete(request) -> response` — so the
decoder never knows whether it is talking to a live model or a test double.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from .corpus import CorpusSplit
from .errors import OracleError, RequestError, TransportError
from .prompting import CONTEXT_PREFIX, TAGGED_PREFIX

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 8
    stop: tuple[str, ...] = (" ",)
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")

    def key(self) -> str:
        """Stable content hash used by the record/replay fixture."""
        canonical = json.dumps(
            {
                "prompt": self.prompt,
                "max_tokens": self.max_tokens,
                "stop": list(self.stop),
                "temperature": self.temperature,
            },
            sort_keys=True,
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"

    def __post_init__(self) -> None:
        if not self.text and self.finish_reason == "stop":
            raise ValueError('empty completion must carry a non-normal finish_reason')


class CompletionClient(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


class RateLimiter:
    """Sliding-window budget: at most max_calls per interval, thread-safe."""

    def __init__(self, max_calls: int, per_seconds: float):
        if max_calls < 1 or per_seconds <= 0:
            raise ValueError("rate limit needs max_calls >= 1 and a positive interval")
        self.max_calls = max_calls
        self.per_seconds = per_seconds
        self._stamps: deque[float] = deque()
        self._cond = threading.Condition()

    def acquire(self) -> None:
        with self._cond:
            while True:
                now = time.monotonic()
                while self._stamps and now - self._stamps[0] >= self.per_seconds:
                    self._stamps.popleft()
                if len(self._stamps) < self.max_calls:
                    self._stamps.append(now)
                    return
                self._cond.wait(timeout=self.per_seconds - (now - self._stamps[0]))


class RemotePLMClient:
    """HTTP completion endpoint with bounded retry and a request budget.

    Wire format: POST {"prompt", "max_tokens", "temperature", "stop"} and
    read back {"text", "finish_reason"}.  With chat_wrap=True the prompt is
    sent as a single user message instead, for chat-only endpoints.
    """

    def __init__(
        self,
        url: str,
        token: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        backoff_cap: float = 8.0,
        rate_limiter: RateLimiter | None = None,
        chat_wrap: bool = False,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        self.url = url
        self.chat_wrap = chat_wrap
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._timeout = timeout
        self._max_retries = max_retries
        self._backoff = backoff
        self._backoff_cap = backoff_cap
        self._rate_limiter = rate_limiter
        self._session = session or requests.Session()
        self._sleep = sleep

    def _payload(self, request: CompletionRequest) -> dict:
        body = {
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop),
        }
        if self.chat_wrap:
            body["messages"] = [{"role": "user", "content": request.prompt}]
        else:
            body["prompt"] = request.prompt
        return body

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        payload = self._payload(request)
        last: Exception | None = None
        for attempt in range(self._max_retries + 1):
            if attempt:
                self._sleep(min(self._backoff * 2 ** (attempt - 1), self._backoff_cap))
            if self._rate_limiter is not None:
                self._rate_limiter.acquire()
            try:
                resp = self._session.post(
                    self.url, json=payload, headers=self._headers, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code == 200:
                data = resp.json()
                return CompletionResponse(data["text"], data.get("finish_reason", "stop"))
            if resp.status_code in RETRYABLE_STATUSES:
                last = TransportError(f"HTTP {resp.status_code}")
                continue
            if 400 <= resp.status_code < 500:
                raise RequestError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            last = TransportError(f"HTTP {resp.status_code}")
        raise TransportError(
            f"completion endpoint {self.url} failed after "
            f"{self._max_retries + 1} attempts: {last}"
        )


def _pending_query(prompt: str) -> tuple[list[str], int]:
    """Extract (test tokens, pending position) from a structured prompt.

    The prompt must end with a partially tagged line whose final unit is
    "token_" — the token the model is being asked to label.
    """
    lines = prompt.split("\n")
    last = lines[-1]
    if not last.startswith(TAGGED_PREFIX):
        raise OracleError("prompt does not end in a Tagged line")
    tokens: list[str] | None = None
    for line in reversed(lines[:-1]):
        if line.startswith(CONTEXT_PREFIX + " "):
            tokens = line[len(CONTEXT_PREFIX) + 1 :].split()
            break
    if tokens is None:
        raise OracleError("prompt has no Context line")
    units = last[len(TAGGED_PREFIX) :].split()
    if not units or not units[-1].endswith("_"):
        raise OracleError("no pending token: the Tagged line must end with 'token_'")
    position = len(units) - 1
    if position >= len(tokens):
        raise OracleError(
            f"pending position {position} beyond sentence of {len(tokens)} tokens"
        )
    pending = units[-1][:-1]
    if pending != tokens[position]:
        raise OracleError(
            f"pending token {pending!r} does not match Context token "
            f"{tokens[position]!r} at position {position}"
        )
    return tokens, position


def _noise_draw(seed: int, tokens: list[str], position: int) -> tuple[float, int]:
    """Schedule-independent pseudo-random draw for one (sentence, position)."""
    material = f"{seed}|{' '.join(tokens)}|{position}".encode("utf-8")
    digest = hashlib.blake2b(material).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    pick = int.from_bytes(digest[8:16], "big")
    return u, pick


class OraclePLMClient:
    """Answers every label query with the gold label.

    With noise > 0, each answer is independently flipped to a uniformly
    random wrong label with that probability.  Flips are derived from the
    (sentence, position) content, so results do not depend on request
    order or thread scheduling.
    """

    def __init__(self, gold: CorpusSplit, noise: float = 0.0, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise ValueError(f"noise must be in [0, 1], got {noise}")
        self.gold = gold
        self.noise = noise
        self.seed = seed
        self._by_tokens = {s.tokens: s for s in gold}

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        tokens, position = _pending_query(request.prompt)
        sentence = self._by_tokens.get(tuple(tokens))
        if sentence is None:
            raise OracleError(f"no gold sentence with tokens {tokens[:5]}...")
        label = sentence.labels[position]
        if self.noise > 0.0:
            u, pick = _noise_draw(self.seed, tokens, position)
            if u < self.noise:
                wrong = [l for l in self.gold.scheme.labels if l != label]
                label = wrong[pick % len(wrong)]
        return CompletionResponse(label)


def oracle_complete(
    request: CompletionRequest, gold: CorpusSplit, noise: float = 0.0, seed: int = 0
) -> CompletionResponse:
    """One-shot form of OraclePLMClient for callers without a client handle."""
    return OraclePLMClient(gold, noise=noise, seed=seed).complete(request)


class ReplayClient:
    """Serves completions from a recorded fixture; misses are transport errors."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._responses: dict[str, CompletionResponse] = {}
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                self._responses[rec["key"]] = CompletionResponse(
                    rec["text"], rec.get("finish_reason", "stop")
                )

    def __len__(self) -> int:
        return len(self._responses)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        response = self._responses.get(request.key())
        if response is None:
            raise TransportError(f"no recorded response for request {request.key()[:12]}...")
        return response


class RecordingClient:
    """Wraps any client and appends (request hash, response) to a fixture."""

    def __init__(self, inner: CompletionClient, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        response = self.inner.complete(request)
        key = request.key()
        with self._lock:
            if key not in self._seen:
                self._seen.add(key)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(
                        json.dumps(
                            {"key": key, "text": response.text, "finish_reason": response.finish_reason}
                        )
                        + "\n"
                    )
        return response
