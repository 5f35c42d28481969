"""Chat-completion client with retry/backoff, plus a deterministic mock.

The HTTP client speaks the common chat-completion wire format (messages
array, temperature, max tokens). The mock replays scripted responses
keyed by prompt fingerprint, with an optional fallback script for prompts
it has never seen (retry prompts carry an appended reminder and therefore
a new fingerprint).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

__all__ = [
    "LlmRequest",
    "LlmResponse",
    "LlmError",
    "LlmConfigError",
    "LlmTransportError",
    "ChatClient",
    "HttpLlmClient",
    "MockLlmClient",
    "prompt_fingerprint",
    "API_KEY_ENV",
]

API_KEY_ENV = "LLM_API_KEY"

_BACKOFF_BASE_S = 1.0
_BACKOFF_FACTOR = 2.0
_MAX_TRIES = 5
_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024

    @property
    def fingerprint(self) -> str:
        return prompt_fingerprint(self.prompt)


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0


class LlmError(Exception):
    pass


class LlmConfigError(LlmError):
    """Missing or invalid endpoint configuration; raised before any I/O."""


class LlmTransportError(LlmError):
    """Network or provider failure that survived the retry budget."""


class ChatClient(Protocol):
    def complete(self, request: LlmRequest) -> LlmResponse: ...


class HttpLlmClient:
    """Chat-completion HTTP client with exponential backoff."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        http: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not base_url:
            raise LlmConfigError("endpoint base URL is required")
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise LlmConfigError(f"no API key: set {API_KEY_ENV} or pass api_key")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self._key = key
        self._http = http or httpx.Client(timeout=120.0)
        self._sleep = sleep

    def complete(self, request: LlmRequest) -> LlmResponse:
        body = {
            "model": request.model or self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self._key}"}
        delay = _BACKOFF_BASE_S
        last_error: Exception | None = None
        started = time.monotonic()
        for attempt in range(_MAX_TRIES):
            if attempt:
                self._sleep(delay)
                delay *= _BACKOFF_FACTOR
            try:
                resp = self._http.post(
                    f"{self.base_url}/chat/completions", json=body, headers=headers
                )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = LlmTransportError(
                    f"provider returned {resp.status_code}"
                )
                continue
            if resp.status_code in (401, 403):
                raise LlmConfigError(f"authentication failed ({resp.status_code})")
            if resp.status_code != 200:
                raise LlmTransportError(
                    f"unexpected status {resp.status_code}: {resp.text[:200]}"
                )
            payload = resp.json()
            usage = payload.get("usage", {})
            return LlmResponse(
                text=payload["choices"][0]["message"]["content"],
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
                latency_s=time.monotonic() - started,
            )
        raise LlmTransportError(f"exhausted {_MAX_TRIES} tries: {last_error}")


@dataclass
class MockLlmClient:
    """Deterministic scripted client for tests and offline runs.

    fixtures maps prompt fingerprints to a response string or a list of
    strings consumed call by call. Unmatched prompts consume the fallback
    script; once a list runs out its last element repeats.
    """

    fixtures: dict[str, str | list[str]] = field(default_factory=dict)
    script: list[str] = field(default_factory=list)
    calls: list[LlmRequest] = field(default_factory=list)
    _cursors: dict[str, int] = field(default_factory=dict)
    _script_pos: int = 0

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.calls.append(request)
        fp = request.fingerprint
        if fp in self.fixtures:
            entry = self.fixtures[fp]
            if isinstance(entry, str):
                return LlmResponse(entry)
            pos = self._cursors.get(fp, 0)
            self._cursors[fp] = pos + 1
            return LlmResponse(entry[min(pos, len(entry) - 1)])
        if self.script:
            pos = min(self._script_pos, len(self.script) - 1)
            self._script_pos += 1
            return LlmResponse(self.script[pos])
        raise LlmTransportError(f"mock has no response for fingerprint {fp[:12]}")
