"""Chat-completion access with live and record/replay backends.

Requests are content-addressed: a digest over the semantic request fields
keys the replay store, so identical requests replay byte-identically and the
k sampled attempts on one problem (distinguished by ``sample_index``) occupy
distinct cache slots.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import requests

from .errors import (
    ConfigError,
    EmptyCellError,
    EndpointUnreachableError,
    MalformedResponseError,
    ReplayMissError,
)

DEFAULT_MAX_NEW_TOKENS = 8192
DEFAULT_API_KEY_ENV = "FORMALQA_API_KEY"


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.6
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    thinking_mode: bool = False
    sample_index: int = 0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request must carry at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.sample_index < 0:
            raise ValueError("sample_index must be non-negative")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend: str  # live | replay
    truncated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if not self.text and not self.truncated:
            raise ValueError("empty completion text is only valid when truncated")


def request_digest(request: ChatRequest) -> str:
    """Content digest of a request; invariant to serialization field order."""
    payload = {
        "model_id": request.model_id,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
        "max_new_tokens": request.max_new_tokens,
        "thinking_mode": request.thinking_mode,
        "sample_index": request.sample_index,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TokenLedger:
    """Thread-safe per-(group, dataset) completion-token accounting.

    A "group" is any attribution label: the orchestrator records one cell per
    pipeline stage and one roll-up cell per method, so both per-stage and
    per-method averages fall out of the same ledger.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._sums: dict[tuple[str, str], int] = {}
        self._counts: dict[tuple[str, str], int] = {}

    def record(self, group: str, dataset: str, completion_tokens: int) -> None:
        if completion_tokens < 0:
            raise ValueError("completion_tokens must be non-negative")
        key = (group, dataset)
        with self._lock:
            self._sums[key] = self._sums.get(key, 0) + completion_tokens
            self._counts[key] = self._counts.get(key, 0) + 1

    def average(self, group: str, dataset: str) -> Fraction:
        """Mean completion tokens per query for a cell; exact rational."""
        key = (group, dataset)
        with self._lock:
            count = self._counts.get(key, 0)
            if count == 0:
                raise EmptyCellError(f"no queries recorded for {key}")
            return Fraction(self._sums[key], count)

    def cells(self) -> dict[tuple[str, str], tuple[int, int]]:
        """Snapshot of ``(group, dataset) -> (sum, count)``."""
        with self._lock:
            return {key: (self._sums[key], self._counts[key]) for key in self._sums}


def ledger_average(ledger: TokenLedger, method: str, dataset: str) -> Fraction:
    return ledger.average(method, dataset)


class LiveBackend:
    """Speaks the de-facto chat-completions wire protocol.

    POSTs ``{model, messages, temperature, max_tokens, ...}`` to the
    configured URL with bearer-token auth taken from an environment variable.
    Transport failures are retried with exponential backoff; malformed
    response bodies are not retried.

    The thinking toggle is transmitted per ``thinking_style``:

    - ``"chat_template_kwargs"``: ``{"chat_template_kwargs": {"enable_thinking": ...}}``
    - ``"field"``: top-level ``{"enable_thinking": ...}``
    - ``"directive"``: for endpoints without such an option, a ``/think`` or
      ``/no_think`` line is prepended to the system message.
    """

    name = "live"

    def __init__(
        self,
        url: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        thinking_style: str = "chat_template_kwargs",
        timeout: float = 600.0,
        retries: int = 3,
        backoff: float = 1.0,
        session=None,
        sleep=time.sleep,
    ):
        if thinking_style not in ("chat_template_kwargs", "field", "directive"):
            raise ConfigError(f"unknown thinking_style {thinking_style!r}")
        self.url = url
        self.api_key_env = api_key_env
        self.thinking_style = thinking_style
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()
        self._sleep = sleep

    def _build_body(self, request: ChatRequest) -> dict:
        messages = [{"role": m.role, "content": m.content} for m in request.messages]
        body = {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_new_tokens,
        }
        if self.thinking_style == "chat_template_kwargs":
            body["chat_template_kwargs"] = {"enable_thinking": request.thinking_mode}
        elif self.thinking_style == "field":
            body["enable_thinking"] = request.thinking_mode
        else:
            directive = "/think" if request.thinking_mode else "/no_think"
            if messages and messages[0]["role"] == "system":
                messages[0] = {
                    "role": "system",
                    "content": f"{directive}\n{messages[0]['content']}",
                }
            else:
                messages.insert(0, {"role": "system", "content": directive})
            body["messages"] = messages
        return body

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = self._build_body(request)
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                http = self._session.post(self.url, json=body, headers=headers, timeout=self.timeout)
                if http.status_code >= 500 or http.status_code == 429:
                    raise requests.HTTPError(f"status {http.status_code}")
                if http.status_code >= 400:
                    raise MalformedResponseError(
                        f"endpoint rejected request: status {http.status_code}: {http.text[:500]}"
                    )
                return self._parse(http.json())
            except requests.RequestException as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    self._sleep(self.backoff * (2**attempt))
        raise EndpointUnreachableError(
            f"{self.url} unreachable after {self.retries} attempts: {last_error}"
        )

    @staticmethod
    def _parse(payload: dict) -> ChatResponse:
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"] or ""
            usage = payload.get("usage") or {}
            return ChatResponse(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                backend="live",
                truncated=choice.get("finish_reason") == "length",
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected completion payload: {exc!r}") from None


def _read_transcript(path: Path) -> ChatResponse:
    data = json.loads(path.read_text(encoding="utf-8"))
    return ChatResponse(
        text=data["text"],
        prompt_tokens=int(data.get("prompt_tokens", 0)),
        completion_tokens=int(data.get("completion_tokens", 0)),
        backend="replay",
        truncated=bool(data.get("truncated", False)),
    )


class ReplayBackend:
    """Serves responses from a transcripts directory, one JSON file per digest."""

    name = "replay"

    def __init__(self, transcripts_dir: str | Path):
        self.transcripts_dir = Path(transcripts_dir)

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request)
        path = self.transcripts_dir / f"{digest}.json"
        if not path.exists():
            raise ReplayMissError(f"no transcript for digest {digest}")
        return _read_transcript(path)


def atomic_write_text(path: Path, text: str) -> None:
    """Write-then-rename so a crash never leaves a partial file behind."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ChatClient:
    """Uniform completion entry point.

    Bounds in-flight requests, optionally records transcripts (digest ->
    response JSON) for later replay, and attributes completion tokens to a
    :class:`TokenLedger` cell when the caller names one. The record store is
    read-through: a request whose digest was already recorded is served from
    disk instead of re-hitting the backend, so repeated identical queries
    (same problem, same sample_index) cost nothing.
    """

    def __init__(
        self,
        backend,
        ledger: TokenLedger | None = None,
        record_dir: str | Path | None = None,
        max_in_flight: int = 8,
        max_tokens_ceiling: int = DEFAULT_MAX_NEW_TOKENS,
    ):
        self.backend = backend
        self.ledger = ledger
        self.record_dir = Path(record_dir) if record_dir else None
        self.max_tokens_ceiling = max_tokens_ceiling
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def complete(
        self, request: ChatRequest, stage: str | None = None, dataset: str | None = None
    ) -> ChatResponse:
        if request.max_new_tokens > self.max_tokens_ceiling:
            raise ConfigError(
                f"max_new_tokens {request.max_new_tokens} exceeds ceiling {self.max_tokens_ceiling}"
            )
        transcript = (
            self.record_dir / f"{request_digest(request)}.json" if self.record_dir else None
        )
        if transcript is not None and transcript.exists():
            response = _read_transcript(transcript)
        else:
            with self._gate:
                response = self.backend.complete(request)
            if transcript is not None:
                record = {
                    "text": response.text,
                    "prompt_tokens": response.prompt_tokens,
                    "completion_tokens": response.completion_tokens,
                    "truncated": response.truncated,
                }
                atomic_write_text(transcript, json.dumps(record, ensure_ascii=False, indent=2))
        if self.ledger is not None and stage is not None and dataset is not None:
            self.ledger.record(stage, dataset, response.completion_tokens)
        return response
