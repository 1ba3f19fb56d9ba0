"""Single chokepoint for model calls, with record/replay cassettes.

Every prompt in the pipeline goes through :func:`LlmGateway.complete`. The
gateway speaks the OpenAI-compatible ``/v1/chat/completions`` wire format
and can persist each exchange to a JSON Lines cassette. Replaying a cassette
makes a whole pipeline run deterministic and offline.

Replay lookup is by request fingerprint. Identical requests (the same prompt
graded twice, for example) share a fingerprint, so recorded exchanges are
consumed in first-in-first-out order per fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import AuthError, CassetteMiss, ConfigError, ProviderError

Transport = Callable[[dict], dict]

VALID_ROLES = ("system", "user", "assistant")
CASSETTE_MODES = ("record", "replay", "passthrough")

# Transport-level retries (network hiccups), distinct from the content
# repair loop owned by the exchange protocol.
TRANSPORT_ATTEMPTS = 2
BACKOFF_SECONDS = 0.5


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class TokenUsage:
    prompt: int = 0
    completion: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.prompt + other.prompt, self.completion + other.completion)


@dataclass(frozen=True)
class ChatRequest:
    """A chat completion request; the unit that gets fingerprinted."""

    messages: tuple[ChatMessage, ...]
    model: str
    temperature: float = 0.8

    def __post_init__(self) -> None:
        if not self.messages:
            raise ConfigError("chat request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ConfigError(f"first message role must be system or user, got {self.messages[0].role}")
        for msg in self.messages:
            if msg.role not in VALID_ROLES:
                raise ConfigError(f"unknown message role {msg.role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 2]")

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChatRequest":
        return cls(
            messages=tuple(ChatMessage(m["role"], m["content"]) for m in data["messages"]),
            model=data["model"],
            temperature=data["temperature"],
        )


def canonical_json(req: ChatRequest) -> str:
    """Canonical serialization: sorted keys, tight separators, exact text."""
    return json.dumps(req.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint(req: ChatRequest) -> str:
    return hashlib.sha256(canonical_json(req).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Exchange:
    fingerprint: str
    request: ChatRequest
    response_text: str
    latency_ms: int = 0
    token_usage: TokenUsage = TokenUsage()

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "request": self.request.to_json(),
            "response_text": self.response_text,
            "latency_ms": self.latency_ms,
            "token_usage": {"prompt": self.token_usage.prompt, "completion": self.token_usage.completion},
        }

    @classmethod
    def from_json(cls, data: dict) -> "Exchange":
        usage = data.get("token_usage") or {}
        return cls(
            fingerprint=data["fingerprint"],
            request=ChatRequest.from_json(data["request"]),
            response_text=data["response_text"],
            latency_ms=data.get("latency_ms", 0),
            token_usage=TokenUsage(usage.get("prompt", 0), usage.get("completion", 0)),
        )


class Cassette:
    """An ordered log of exchanges, persisted as JSON Lines.

    In ``replay`` mode a lookup pops the next unconsumed exchange for the
    fingerprint; a miss is an error, never a silent live call. In ``record``
    mode exchanges are appended to the file as they happen. ``passthrough``
    neither reads nor writes.
    """

    def __init__(self, path: str | Path | None = None, mode: str = "replay") -> None:
        if mode not in CASSETTE_MODES:
            raise ConfigError(f"cassette mode must be one of {CASSETTE_MODES}, got {mode!r}")
        self.mode = mode
        self.path = Path(path) if path is not None else None
        self.exchanges: list[Exchange] = []
        self._queues: dict[str, list[Exchange]] = {}
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists() and mode == "replay":
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                self._index(Exchange.from_json(json.loads(line)))

    def _index(self, exchange: Exchange) -> None:
        self.exchanges.append(exchange)
        self._queues.setdefault(exchange.fingerprint, []).append(exchange)

    def replay(self, fp: str) -> Exchange:
        with self._lock:
            queue = self._queues.get(fp, [])
            cursor = self._cursor.get(fp, 0)
            if cursor >= len(queue):
                raise CassetteMiss(fp)
            self._cursor[fp] = cursor + 1
            return queue[cursor]

    def record(self, exchange: Exchange) -> None:
        with self._lock:
            self._index(exchange)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(exchange.to_json(), ensure_ascii=False) + "\n")

    def total_usage(self) -> TokenUsage:
        total = TokenUsage()
        for exchange in self.exchanges:
            total = total + exchange.token_usage
        return total

    def file_digest(self) -> str | None:
        if self.path is None or not self.path.exists():
            return None
        return hashlib.sha256(self.path.read_bytes()).hexdigest()


def http_transport(base_url: str, api_key: str | None, timeout: float = 120.0) -> Transport:
    """Build the default transport: POST to an OpenAI-compatible endpoint."""
    import httpx

    base = base_url.rstrip("/")
    url = base + "/chat/completions" if base.endswith("/v1") else base + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    def post(payload: dict) -> dict:
        try:
            response = httpx.post(url, json=payload, headers=headers, timeout=timeout)
            response.raise_for_status()
            return response.json()
        except httpx.HTTPError as exc:
            raise ProviderError(f"chat completion request failed: {exc}") from exc

    return post


class LlmGateway:
    """Executes chat requests against a transport, through a cassette."""

    def __init__(
        self,
        model: str,
        base_url: str = "http://localhost:8000",
        api_key: str | None = None,
        transport: Transport | None = None,
        temperature: float = 0.8,
    ) -> None:
        self.model = model
        self.temperature = temperature
        self._api_key = api_key
        self._base_url = base_url
        self._transport = transport
        self._usage = TokenUsage()
        self._usage_lock = threading.Lock()

    @property
    def total_usage(self) -> TokenUsage:
        return self._usage

    def require_credential(self) -> None:
        """Raise AuthError when live calls would run without a credential."""
        if self._transport is None and not self._api_key:
            raise AuthError("no API key configured; set the credential env var or use a replay cassette")

    def _live_transport(self) -> Transport:
        if self._transport is not None:
            return self._transport
        self.require_credential()
        self._transport = http_transport(self._base_url, self._api_key)
        return self._transport

    def _add_usage(self, usage: TokenUsage) -> None:
        with self._usage_lock:
            self._usage = self._usage + usage

    def complete(self, req: ChatRequest, cassette: Cassette) -> str:
        """Resolve one chat request and return the raw response text."""
        fp = fingerprint(req)
        if cassette.mode == "replay":
            exchange = cassette.replay(fp)
            self._add_usage(exchange.token_usage)
            return exchange.response_text

        transport = self._live_transport()
        payload = req.to_json()
        last_error: Exception | None = None
        for attempt in range(TRANSPORT_ATTEMPTS):
            try:
                started = time.monotonic()
                data = transport(payload)
                latency_ms = int((time.monotonic() - started) * 1000)
                break
            except ProviderError as exc:
                last_error = exc
                if attempt + 1 < TRANSPORT_ATTEMPTS:
                    time.sleep(BACKOFF_SECONDS * (2**attempt))
        else:
            raise ProviderError(f"transport failed after {TRANSPORT_ATTEMPTS} attempts: {last_error}") from last_error

        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion response: {data!r}") from exc
        usage_data = data.get("usage") or {}
        usage = TokenUsage(usage_data.get("prompt_tokens", 0), usage_data.get("completion_tokens", 0))
        exchange = Exchange(
            fingerprint=fp,
            request=req,
            response_text=text,
            latency_ms=latency_ms,
            token_usage=usage,
        )
        if cassette.mode == "record":
            cassette.record(exchange)
        self._add_usage(usage)
        return text
