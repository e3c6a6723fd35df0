"""Provider-neutral LLM access with usage accounting.

Two implementations share one interface: HttpGateway speaks a
chat-completion style HTTP API, ScriptedGateway replays canned responses
from a script for deterministic offline runs.  Every call records a usage
delta in the gateway ledger; usage_report() returns the running totals.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


class EmptyCompletion(GatewayError):
    pass


@dataclass
class CompletionRequest:
    prompt: str
    temperature: float = 0.5
    max_tokens: int = 4096
    model_id: str = ""


@dataclass
class UsageRecord:
    input_tokens: int = 0
    output_tokens: int = 0
    query_count: int = 0
    estimated_cost: float = 0.0

    def __add__(self, other: "UsageRecord") -> "UsageRecord":
        return UsageRecord(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.query_count + other.query_count,
            self.estimated_cost + other.estimated_cost,
        )

    def __sub__(self, other: "UsageRecord") -> "UsageRecord":
        return UsageRecord(
            self.input_tokens - other.input_tokens,
            self.output_tokens - other.output_tokens,
            self.query_count - other.query_count,
            self.estimated_cost - other.estimated_cost,
        )

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "query_count": self.query_count,
            "estimated_cost": self.estimated_cost,
        }


@dataclass
class PriceTable:
    """Per-token prices; cost is tokens times price, summed over direction."""

    input_per_token: float = 0.0
    output_per_token: float = 0.0

    def cost(self, input_tokens: int, output_tokens: int) -> float:
        return input_tokens * self.input_per_token + output_tokens * self.output_per_token


def estimate_tokens(text: str) -> int:
    """Cheap deterministic token estimate used by the scripted gateway."""
    return max(1, (len(text) + 3) // 4)


class Gateway:
    """Shared accounting base; subclasses provide _complete and _embed."""

    def __init__(self, prices: PriceTable | None = None):
        self.prices = prices or PriceTable()
        self._lock = threading.Lock()
        self._ledger: list[UsageRecord] = []
        self._totals = UsageRecord()

    def _record(self, input_tokens: int, output_tokens: int) -> UsageRecord:
        delta = UsageRecord(
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            query_count=1,
            estimated_cost=self.prices.cost(input_tokens, output_tokens),
        )
        with self._lock:
            self._ledger.append(delta)
            self._totals = self._totals + delta
        return delta

    def usage_report(self) -> UsageRecord:
        with self._lock:
            return UsageRecord(
                self._totals.input_tokens,
                self._totals.output_tokens,
                self._totals.query_count,
                self._totals.estimated_cost,
            )

    def ledger(self) -> list[UsageRecord]:
        with self._lock:
            return list(self._ledger)

    def complete(self, request: CompletionRequest) -> tuple[str, UsageRecord]:
        text, input_tokens, output_tokens = self._complete(request)
        delta = self._record(input_tokens, output_tokens)
        return text, delta

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        vectors, input_tokens = self._embed(texts)
        self._record(input_tokens, 0)
        return vectors

    @property
    def embedder_id(self) -> str:
        raise NotImplementedError

    def _complete(self, request: CompletionRequest) -> tuple[str, int, int]:
        raise NotImplementedError

    def _embed(self, texts: list[str]) -> tuple[list[np.ndarray], int]:
        raise NotImplementedError


def pseudo_embedding(text: str, dimension: int) -> np.ndarray:
    """Deterministic unit vector derived from a hash of the text."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    vec = rng.standard_normal(dimension)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        vec = np.zeros(dimension)
        vec[0] = 1.0
        return vec
    return vec / norm


class ScriptedGateway(Gateway):
    """Replays completions from an ordered script.

    Script entries are either plain strings or objects with a `text` field
    and optional `input_tokens` / `output_tokens` overrides.  Embeddings
    are hash-derived pseudo-vectors, identical for identical text.
    """

    def __init__(
        self,
        replies: list,
        dimension: int = 64,
        prices: PriceTable | None = None,
    ):
        super().__init__(prices)
        self._replies = list(replies)
        self._cursor = 0
        self.dimension = dimension

    @classmethod
    def from_file(cls, path: str | Path, dimension: int = 64, prices: PriceTable | None = None) -> "ScriptedGateway":
        replies = json.loads(Path(path).read_text())
        if not isinstance(replies, list):
            raise ValueError(f"{path}: completion script must be a JSON array")
        return cls(replies, dimension=dimension, prices=prices)

    @property
    def embedder_id(self) -> str:
        return f"scripted-sha256-{self.dimension}"

    def remaining(self) -> int:
        return len(self._replies) - self._cursor

    def _complete(self, request: CompletionRequest) -> tuple[str, int, int]:
        with self._lock:
            if self._cursor >= len(self._replies):
                raise ScriptExhausted(
                    f"completion script exhausted after {len(self._replies)} replies"
                )
            entry = self._replies[self._cursor]
            self._cursor += 1
        if isinstance(entry, str):
            text = entry
            input_tokens = estimate_tokens(request.prompt)
            output_tokens = estimate_tokens(text)
        else:
            text = entry.get("text", "")
            input_tokens = int(entry.get("input_tokens", estimate_tokens(request.prompt)))
            output_tokens = int(entry.get("output_tokens", estimate_tokens(text)))
        return text, input_tokens, output_tokens

    def _embed(self, texts: list[str]) -> tuple[list[np.ndarray], int]:
        vectors = [pseudo_embedding(t, self.dimension) for t in texts]
        return vectors, sum(estimate_tokens(t) for t in texts)


class HttpGateway(Gateway):
    """Chat-completion HTTP client with bounded retry.

    Credentials come from the environment, never from configuration files.
    Transient failures (connection errors, HTTP 5xx, 429) are retried with
    exponential backoff up to retry_count times.
    """

    def __init__(
        self,
        endpoint: str,
        model_id: str = "",
        embed_endpoint: str = "",
        embed_model_id: str = "",
        api_key_env: str = "PROOFKIT_API_KEY",
        retry_count: int = 3,
        retry_base_delay: float = 0.5,
        timeout: float = 120.0,
        prices: PriceTable | None = None,
        transport=None,
    ):
        super().__init__(prices)
        self.endpoint = endpoint
        self.model_id = model_id
        self.embed_endpoint = embed_endpoint
        self.embed_model_id = embed_model_id or model_id
        self.api_key_env = api_key_env
        self.retry_count = retry_count
        self.retry_base_delay = retry_base_delay
        self.timeout = timeout
        self._transport = transport or self._requests_transport

    @property
    def embedder_id(self) -> str:
        return self.embed_model_id or "http-embedder"

    def _api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise AuthError(f"missing API key: set ${self.api_key_env}")
        return key

    def _requests_transport(self, url: str, payload: dict, headers: dict):
        import requests

        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        body = {}
        try:
            body = resp.json()
        except ValueError:
            pass
        return resp.status_code, body

    def _post(self, url: str, payload: dict) -> dict:
        headers = {
            "Authorization": f"Bearer {self._api_key()}",
            "Content-Type": "application/json",
        }
        last_error: GatewayError | None = None
        for attempt in range(self.retry_count + 1):
            try:
                status, body = self._transport(url, payload, headers)
            except TransportError as exc:
                last_error = exc
                status = None
            else:
                if status in (401, 403):
                    raise AuthError(f"HTTP {status} from {url}")
                if status is not None and status < 400:
                    return body
                if status == 429:
                    last_error = RateLimited(f"HTTP 429 from {url}")
                elif status is not None and status >= 500:
                    last_error = TransportError(f"HTTP {status} from {url}")
                else:
                    raise TransportError(f"HTTP {status} from {url}: {body}")
            if attempt < self.retry_count:
                time.sleep(self.retry_base_delay * (2**attempt))
        assert last_error is not None
        raise last_error

    def _complete(self, request: CompletionRequest) -> tuple[str, int, int]:
        if not self.endpoint:
            raise TransportError("no completion endpoint configured")
        payload = {
            "model": request.model_id or self.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        body = self._post(self.endpoint, payload)
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {body}") from exc
        usage = body.get("usage") or {}
        input_tokens = int(usage.get("prompt_tokens", estimate_tokens(request.prompt)))
        output_tokens = int(usage.get("completion_tokens", estimate_tokens(text)))
        return text, input_tokens, output_tokens

    def _embed(self, texts: list[str]) -> tuple[list[np.ndarray], int]:
        if not self.embed_endpoint:
            raise TransportError("no embedding endpoint configured")
        payload = {"model": self.embed_model_id, "input": texts}
        body = self._post(self.embed_endpoint, payload)
        try:
            vectors = [np.asarray(d["embedding"], dtype=float) for d in body["data"]]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed embedding response: {body}") from exc
        usage = body.get("usage") or {}
        input_tokens = int(usage.get("prompt_tokens", sum(estimate_tokens(t) for t in texts)))
        return vectors, input_tokens
