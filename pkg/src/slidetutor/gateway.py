"""Single chokepoint for model calls.

Every prompt in the system goes through Gateway.complete: it validates the
request shape, applies the retry policy, appends to the call log, and hands
the request to whichever backend is plugged in. The scripted backend replays
fixture files so the full pipeline runs without a network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .config import GatewayConfig
from .errors import (
    AssertionFailed,
    BackendRejected,
    EmptyCompletion,
    FixtureExhausted,
    InvalidRequest,
    RetriesExhausted,
    Timeout,
    TransientBackendError,
)

MAX_IMAGE_BYTES = 4 * 1024 * 1024


@dataclass(frozen=True)
class SamplingParams:
    max_tokens: int
    temperature: float
    top_p: float
    n: int = 1


# Pre-class calls take the planner profile, in-class calls the tutor profile.
PROFILES: dict[str, SamplingParams] = {
    "planner": SamplingParams(max_tokens=4096, temperature=1.0, top_p=1.0, n=1),
    "tutor": SamplingParams(max_tokens=1024, temperature=0.95, top_p=0.7, n=1),
}


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    text: str
    images: tuple[bytes, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class ModelRequest:
    profile: str
    messages: tuple[Message, ...]
    params: SamplingParams

    def validate(self) -> None:
        if self.profile not in PROFILES:
            raise InvalidRequest(f"unknown profile {self.profile!r}")
        if not self.messages or self.messages[0].role != "system":
            raise InvalidRequest("first message must be the system message")
        if sum(1 for m in self.messages if m.role == "system") != 1:
            raise InvalidRequest("request must carry exactly one system message")
        for msg in self.messages:
            if msg.role not in ("system", "user", "assistant"):
                raise InvalidRequest(f"unknown role {msg.role!r}")
            if msg.images and msg.role != "user":
                raise InvalidRequest("images are only allowed on user messages")
            for img in msg.images:
                if len(img) > MAX_IMAGE_BYTES:
                    raise InvalidRequest(
                        f"image of {len(img)} bytes exceeds the {MAX_IMAGE_BYTES} byte cap"
                    )


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ModelCompletion:
    text: str
    finish_reason: str = "stop"
    usage: Usage = field(default_factory=Usage)


def make_request(
    profile: str,
    system: str,
    turns: list[Message] | None = None,
    **overrides,
) -> ModelRequest:
    """Assemble a request with the profile's default sampling parameters."""
    params = PROFILES[profile]
    if overrides:
        params = SamplingParams(
            max_tokens=overrides.get("max_tokens", params.max_tokens),
            temperature=overrides.get("temperature", params.temperature),
            top_p=overrides.get("top_p", params.top_p),
            n=overrides.get("n", params.n),
        )
    messages = (Message(role="system", text=system),) + tuple(turns or ())
    return ModelRequest(profile=profile, messages=messages, params=params)


def request_hash(request: ModelRequest) -> str:
    """Stable digest of a request; images enter by their own digest."""
    payload = {
        "profile": request.profile,
        "messages": [
            {
                "role": m.role,
                "text": m.text,
                "images": [hashlib.sha256(img).hexdigest() for img in m.images],
            }
            for m in request.messages
        ],
        "params": {
            "max_tokens": request.params.max_tokens,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "n": request.params.n,
        },
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class Backend(Protocol):
    def complete(self, request: ModelRequest, timeout: float) -> ModelCompletion: ...


class Gateway:
    """Retry, log, and rate-limit wrapper around a backend."""

    def __init__(
        self,
        backend: Backend,
        config: GatewayConfig | None = None,
        clock=time.time,
        sleep=time.sleep,
    ):
        self.backend = backend
        self.config = config or GatewayConfig()
        self._clock = clock
        self._sleep = sleep
        self._log_lock = threading.Lock()
        self._inflight = threading.BoundedSemaphore(max(1, self.config.max_inflight))
        self.log_records: list[dict] = []

    def complete(self, request: ModelRequest) -> ModelCompletion:
        request.validate()
        digest = request_hash(request)
        last_error: Exception | None = None
        with self._inflight:
            for attempt in range(self.config.attempts):
                if attempt:
                    self._sleep(self.config.backoff_base_s * (2 ** (attempt - 1)))
                try:
                    completion = self.backend.complete(request, timeout=self.config.timeout_s)
                except TransientBackendError as exc:
                    last_error = exc
                    self._log(request.profile, digest, status=type(exc).__name__)
                    continue
                except BackendRejected as exc:
                    self._log(request.profile, digest, status="rejected")
                    raise exc
                if completion.finish_reason == "stop" and not completion.text.strip():
                    self._log(request.profile, digest, status="empty")
                    raise EmptyCompletion("backend returned a stop-finished empty completion")
                # the log entry lands before any caller sees the completion
                self._log(request.profile, digest, status="ok", usage=completion.usage)
                return completion
        raise RetriesExhausted(
            f"backend failed {self.config.attempts} times; last error: {last_error}"
        ) from last_error

    def _log(self, profile: str, digest: str, status: str, usage: Usage | None = None) -> None:
        record = {
            "timestamp": self._clock(),
            "profile": profile,
            "request_hash": digest,
            "status": status,
            "usage": {
                "prompt_tokens": usage.prompt_tokens if usage else 0,
                "completion_tokens": usage.completion_tokens if usage else 0,
            },
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._log_lock:
            self.log_records.append(record)
            if self.config.log_path:
                path = Path(self.config.log_path)
                path.parent.mkdir(parents=True, exist_ok=True)
                with path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")


def _wire_messages(request: ModelRequest) -> list[dict]:
    out = []
    for msg in request.messages:
        if msg.images:
            parts: list[dict] = [{"type": "text", "text": msg.text}]
            for img in msg.images:
                parts.append({
                    "type": "image_b64",
                    "data": base64.b64encode(img).decode("ascii"),
                })
            out.append({"role": msg.role, "content": parts})
        else:
            out.append({"role": msg.role, "content": msg.text})
    return out


class HttpBackend:
    """Generic JSON chat-completion client.

    ``transport`` is forwarded to httpx so tests can run against an in-process
    ASGI app instead of a socket.
    """

    def __init__(
        self,
        endpoint: str,
        auth_token: str = "",
        models: dict[str, str] | None = None,
        transport=None,
    ):
        import httpx

        self.endpoint = endpoint
        self.models = dict(models or {})
        headers = {"Authorization": f"Bearer {auth_token}"} if auth_token else {}
        self._client = httpx.Client(transport=transport, headers=headers)
        self._httpx = httpx

    def complete(self, request: ModelRequest, timeout: float) -> ModelCompletion:
        payload = {
            "model": self.models.get(request.profile, request.profile),
            "messages": _wire_messages(request),
            "max_tokens": request.params.max_tokens,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "n": request.params.n,
        }
        try:
            response = self._client.post(self.endpoint, json=payload, timeout=timeout)
        except self._httpx.TimeoutException as exc:
            raise Timeout(f"backend call exceeded {timeout}s") from exc
        except self._httpx.TransportError as exc:
            raise TransientBackendError(f"transport failure: {exc}") from exc
        if 400 <= response.status_code < 500:
            raise BackendRejected(f"backend answered {response.status_code}: {response.text[:200]}")
        if response.status_code >= 500:
            raise TransientBackendError(f"backend answered {response.status_code}")
        body = response.json()
        choice = body["choices"][0]
        usage = body.get("usage", {})
        return ModelCompletion(
            text=choice["message"]["content"],
            finish_reason=choice.get("finish_reason", "stop"),
            usage=Usage(
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
            ),
        )

    def close(self) -> None:
        self._client.close()


def _request_text(request: ModelRequest) -> str:
    return "\n".join(m.text for m in request.messages)


def _check_expectation(request: ModelRequest, expect: dict, where: str) -> None:
    history = [m for m in request.messages if m.role != "system"]
    full_text = _request_text(request)
    if "profile" in expect and request.profile != expect["profile"]:
        raise AssertionFailed(f"{where}: profile {request.profile!r} != {expect['profile']!r}")
    if "history" in expect and len(history) != expect["history"]:
        raise AssertionFailed(f"{where}: {len(history)} history messages, expected {expect['history']}")
    if "max_history" in expect and len(history) > expect["max_history"]:
        raise AssertionFailed(
            f"{where}: {len(history)} history messages exceed cap {expect['max_history']}"
        )
    if "images" in expect:
        count = sum(len(m.images) for m in request.messages)
        if count != expect["images"]:
            raise AssertionFailed(f"{where}: {count} images attached, expected {expect['images']}")
    for needle in expect.get("contains", []):
        if needle not in full_text:
            raise AssertionFailed(f"{where}: prompt does not contain {needle!r}")
    for needle in expect.get("not_contains", []):
        if needle in full_text:
            raise AssertionFailed(f"{where}: prompt unexpectedly contains {needle!r}")
    for needle in expect.get("system_contains", []):
        if needle not in request.messages[0].text:
            raise AssertionFailed(f"{where}: system message does not contain {needle!r}")


class ScriptedBackend:
    """Serves canned completions in order, optionally asserting request shape.

    Fixture format::

        {"scenario": "plan-golden",
         "entries": [{"expect": {"profile": "planner", "contains": ["..."]},
                      "text": "...", "finish_reason": "stop",
                      "usage": {"prompt_tokens": 1, "completion_tokens": 1}}]}

    With ``cursor_path`` set, the sequence position survives process restarts,
    so a resumed pipeline keeps consuming the same fixture where it left off.
    """

    def __init__(self, fixture: dict, cursor_path: str | Path | None = None):
        self.scenario = fixture.get("scenario", "unnamed")
        self.entries = list(fixture["entries"])
        self.cursor_path = Path(cursor_path) if cursor_path else None
        self.calls: list[ModelRequest] = []
        self._lock = threading.Lock()
        self._cursor = 0
        if self.cursor_path and self.cursor_path.exists():
            self._cursor = int(self.cursor_path.read_text(encoding="utf-8").strip() or "0")

    @classmethod
    def from_file(cls, path: str | Path, cursor_path: str | Path | None = None) -> "ScriptedBackend":
        fixture = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(fixture, cursor_path=cursor_path)

    @property
    def cursor(self) -> int:
        return self._cursor

    def remaining(self) -> int:
        return len(self.entries) - self._cursor

    def complete(self, request: ModelRequest, timeout: float) -> ModelCompletion:
        with self._lock:
            index = self._cursor
            if index >= len(self.entries):
                raise FixtureExhausted(
                    f"scenario {self.scenario!r} exhausted after {len(self.entries)} calls"
                )
            entry = self.entries[index]
            where = f"{self.scenario}[{index}]"
            _check_expectation(request, entry.get("expect", {}), where)
            self._cursor = index + 1
            if self.cursor_path:
                tmp = self.cursor_path.with_suffix(".tmp")
                tmp.write_text(str(self._cursor), encoding="utf-8")
                os.replace(tmp, self.cursor_path)
            self.calls.append(request)
        usage = entry.get("usage", {})
        return ModelCompletion(
            text=entry["text"],
            finish_reason=entry.get("finish_reason", "stop"),
            usage=Usage(
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
            ),
        )
