"""Chat-completion backends.

Two implementations share one interface: a live JSON-over-HTTP client for
any OpenAI-compatible chat endpoint, and a scripted backend that replays
canned responses keyed by a deterministic prompt fingerprint. The scripted
backend never fabricates an answer: an unknown fingerprint raises
``MissingScriptError``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field

import requests

from chime.errors import BackendError, InvalidInputError, MissingScriptError

logger = logging.getLogger(__name__)

_ROLES = ("system", "user", "assistant")
_WS = re.compile(r"\s+")

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_SECONDS = 0.5
DEFAULT_TIMEOUT_SECONDS = 60.0


def _normalize(text: str) -> str:
    """Collapse whitespace runs so incidental formatting drift does not
    change a fingerprint."""
    return _WS.sub(" ", text).strip()


def fingerprint_text(text: str) -> str:
    return hashlib.sha256(_normalize(text).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise InvalidInputError(f"unknown message role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call: ordered messages plus sampling settings."""

    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    model_id: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise InvalidInputError("ChatRequest needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise InvalidInputError("first message must be system or user")
        if self.temperature < 0.0:
            raise InvalidInputError("temperature must be >= 0")

    @classmethod
    def build(
        cls,
        *,
        system: str | None = None,
        user: str,
        temperature: float = 0.0,
        model_id: str = "",
    ) -> "ChatRequest":
        messages: list[ChatMessage] = []
        if system:
            messages.append(ChatMessage("system", system))
        messages.append(ChatMessage("user", user))
        return cls(tuple(messages), temperature=temperature, model_id=model_id)

    def last_user_text(self) -> str | None:
        for message in reversed(self.messages):
            if message.role == "user":
                return message.text
        return None


def canonical_request_text(request: ChatRequest) -> str:
    """Stable plain-text rendering of a request.

    Script files can use this rendering as ``match_key_source_text`` to pin
    a response to a full message sequence rather than a single user message.
    """
    return "\n".join(f"[{m.role}] {_normalize(m.text)}" for m in request.messages)


def fingerprint_request(request: ChatRequest) -> str:
    return fingerprint_text(canonical_request_text(request))


class ChatBackend:
    """Interface both backends implement."""

    def complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


class ScriptedBackend(ChatBackend):
    """Deterministic replay backend for offline tests.

    Responses are keyed by fingerprint. A request matches either on the
    fingerprint of its full canonical rendering or, failing that, on the
    fingerprint of its last user message; script files therefore work both
    with full-sequence keys and with plain question texts. The table is
    immutable after load, so the backend is safe to share across threads.
    """

    def __init__(self, exchanges: dict[str, str]):
        self._table = dict(exchanges)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[ChatRequest | str, str]]) -> "ScriptedBackend":
        table: dict[str, str] = {}
        for source, response in pairs:
            if isinstance(source, ChatRequest):
                table[fingerprint_request(source)] = response
            else:
                table[fingerprint_text(source)] = response
        return cls(table)

    @classmethod
    def load(cls, path: str) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            entries = json.load(fh)
        if not isinstance(entries, list):
            raise InvalidInputError(f"script file {path} must hold a JSON array")
        table: dict[str, str] = {}
        for i, entry in enumerate(entries):
            try:
                source = entry["match_key_source_text"]
                response = entry["response"]
            except (TypeError, KeyError) as exc:
                raise InvalidInputError(f"script entry {i} in {path} is malformed") from exc
            table[fingerprint_text(source)] = response
        return cls(table)

    def complete(self, request: ChatRequest) -> str:
        key = fingerprint_request(request)
        if key in self._table:
            return self._table[key]
        last_user = request.last_user_text()
        if last_user is not None:
            fallback = fingerprint_text(last_user)
            if fallback in self._table:
                return self._table[fallback]
        preview = _normalize(request.last_user_text() or "")[:120]
        raise MissingScriptError(f"no scripted response for request (last user message: {preview!r})")


class LiveChatBackend(ChatBackend):
    """OpenAI-compatible chat-completions client with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str | None = None,
        retries: int = DEFAULT_RETRIES,
        backoff_seconds: float = DEFAULT_BACKOFF_SECONDS,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._model_id = model_id
        self._api_key = api_key or os.environ.get("CHIME_LLM_API_KEY")
        self._retries = retries
        self._backoff = backoff_seconds
        self._timeout = timeout_seconds
        self._session = session or requests.Session()
        self._sleep = sleep

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model_id or self._model_id,
            "temperature": request.temperature,
            "messages": [{"role": m.role, "content": m.text} for m in request.messages],
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: Exception | None = None
        for attempt in range(self._retries):
            try:
                resp = self._session.post(
                    self._url, json=payload, headers=headers, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    return self._extract_text(resp)
                last_error = BackendError(f"chat endpoint returned HTTP {resp.status_code}")
                if resp.status_code in (400, 401, 403, 404):
                    # Client-side mistakes will not heal on retry.
                    raise last_error
            if attempt + 1 < self._retries:
                self._sleep(self._backoff * 2**attempt)
        raise BackendError(f"chat completion failed after {self._retries} attempts: {last_error}")

    @staticmethod
    def _extract_text(resp: requests.Response) -> str:
        try:
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat completion payload: {exc}") from exc
