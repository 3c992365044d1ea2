"""Chat-model access: live HTTP endpoint, scripted mocks, caching, transcripts.

Every model call in the pipeline goes through a Provider. The live provider
speaks the common hosted chat-completions wire format. For tests and offline
runs there is a scripted provider (ordered match rules), a transcript recorder,
and a transcript replayer that reproduces a recorded run bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import tempfile
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import requests

from .errors import (
    NotScriptedError,
    ProviderError,
    ProviderTimeoutError,
    UpstreamClientError,
    UpstreamServerError,
)


class RoleTag(str, Enum):
    """Which agent a request belongs to; drives temperature defaults and mock matching."""

    LINGUISTIC = "linguistic"
    COMMENT = "comment"
    FACT_QUESTION = "fact_question"
    FACT_CHECK = "fact_check"
    QUESTIONING = "questioning"
    OPTIMIZER = "optimizer"
    JUDGE = "judge"


# The rule search needs diverse proposals, the judge must be reproducible.
# Analysis agents default in between; all of these are overridable per run.
PINNED_TEMPERATURES = {RoleTag.OPTIMIZER: 1.0, RoleTag.JUDGE: 0.0}
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 2048


def temperature_for(role: RoleTag, overrides: Mapping[RoleTag, float] | None = None) -> float:
    if overrides and role in overrides:
        return overrides[role]
    return PINNED_TEMPERATURES.get(role, DEFAULT_TEMPERATURE)


@dataclass(frozen=True)
class ChatRequest:
    role: RoleTag
    system_prompt: str
    user_content: str
    temperature: float
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Usage = Usage()
    from_cache: bool = False


def cache_key(endpoint_id: str, request: ChatRequest, nonce: str = "") -> str:
    """Content hash identifying a request to a given endpoint."""
    payload = json.dumps(
        {
            "endpoint": endpoint_id,
            "system": request.system_prompt,
            "user": request.user_content,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "nonce": nonce,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Provider:
    """Base interface: complete() returns the endpoint's text verbatim."""

    endpoint_id = "provider"

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def __deepcopy__(self, memo):
        # A provider is a handle to a service, not data; copies share it.
        return self


def _synthetic_usage(request: ChatRequest, text: str) -> Usage:
    # Rough 4-chars-per-token accounting so mock runs still report usage.
    prompt_chars = len(request.system_prompt) + len(request.user_content)
    return Usage(prompt_tokens=prompt_chars // 4, completion_tokens=max(1, len(text) // 4))


@dataclass(frozen=True)
class ScriptEntry:
    """One mock rule: fires when the role matches and every needle is in user_content.

    `match` may be a single substring, a sequence of substrings (all must be
    present), or empty to match any request for the role.
    """

    role: RoleTag
    match: tuple[str, ...]
    response: str

    @staticmethod
    def make(role: RoleTag | str, match: str | Sequence[str], response: str) -> "ScriptEntry":
        needles = (match,) if isinstance(match, str) else tuple(match)
        return ScriptEntry(role=RoleTag(role), match=needles, response=response)

    def matches(self, request: ChatRequest) -> bool:
        if request.role is not self.role:
            return False
        return all(needle in request.user_content for needle in self.match)


class ScriptedProvider(Provider):
    """Deterministic mock: first declared entry that matches wins.

    Records every request it sees (thread safe), so tests can assert call
    counts and inspect exactly what an agent sent.
    """

    endpoint_id = "scripted"

    def __init__(self, entries: Iterable[ScriptEntry]):
        self.entries = list(entries)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def calls_for(self, role: RoleTag) -> list[ChatRequest]:
        with self._lock:
            return [r for r in self.requests if r.role is role]

    def reset_log(self) -> None:
        with self._lock:
            self.requests.clear()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
        for entry in self.entries:
            if entry.matches(request):
                return ChatResponse(text=entry.response, usage=_synthetic_usage(request, entry.response))
        preview = request.user_content[:120].replace("\n", " ")
        raise NotScriptedError(f"no script entry for role={request.role.value} content={preview!r}")


class CallableProvider(Provider):
    """Adapter for tests: wraps a function request -> text."""

    endpoint_id = "callable"

    def __init__(self, fn: Callable[[ChatRequest], str]):
        self._fn = fn
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
        text = self._fn(request)
        return ChatResponse(text=text, usage=_synthetic_usage(request, text))


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 0.5
    multiplier: float = 2.0
    max_delay: float = 8.0
    jitter: float = 0.25


def call_with_retries(
    fn: Callable[[], ChatResponse],
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> ChatResponse:
    """Retry transient failures (timeouts, 5xx) with capped exponential backoff.

    4xx responses are permanent and re-raised immediately.
    """
    rng = rng or random.Random()
    last: ProviderError | None = None
    for attempt in range(policy.attempts):
        try:
            return fn()
        except (ProviderTimeoutError, UpstreamServerError) as exc:
            last = exc
            if attempt + 1 >= policy.attempts:
                break
            delay = min(policy.max_delay, policy.base_delay * policy.multiplier**attempt)
            sleep(delay * (1.0 + policy.jitter * rng.random()))
    assert last is not None
    raise last


class HTTPProvider(Provider):
    """Client for a chat-completions endpoint (``POST {base_url}/chat/completions``).

    The credential is read from the environment variable named by
    ``credential_env`` at request time; it never appears in configs or logs.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        credential_env: str = "NEWSJURY_API_KEY",
        timeout: float = 60.0,
        retry: RetryPolicy = RetryPolicy(),
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.timeout = timeout
        self.retry = retry
        self._session = session or requests.Session()

    @property
    def endpoint_id(self) -> str:
        return f"{self.base_url}#{self.model}"

    def _post_once(self, request: ChatRequest) -> ChatResponse:
        headers = {}
        token = os.environ.get(self.credential_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_content},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = self._session.post(
                f"{self.base_url}/chat/completions", json=payload, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise ProviderTimeoutError(f"timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise ProviderError(str(exc)) from exc
        if 400 <= resp.status_code < 500:
            raise UpstreamClientError(resp.status_code, resp.text[:200])
        if resp.status_code >= 500:
            raise UpstreamServerError(resp.status_code, resp.text[:200])
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion body: {exc}") from exc
        usage = body.get("usage") or {}
        return ChatResponse(
            text=text,
            usage=Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        return call_with_retries(lambda: self._post_once(request), self.retry)


class CachingProvider(Provider):
    """Persistent response cache keyed by content hash, one file per key.

    Identical requests hit upstream once; later calls return from_cache=True.
    Optimizer calls bypass the cache by default: they run at temperature 1.0
    precisely to get different samples for the same prompt. Set
    ``cache_optimizer=True`` to include them (keys then carry ``run_nonce``).
    """

    def __init__(self, inner: Provider, cache_dir: str | os.PathLike, cache_optimizer: bool = False, run_nonce: str = ""):
        self.inner = inner
        self.cache_dir = str(cache_dir)
        self.cache_optimizer = cache_optimizer
        self.run_nonce = run_nonce
        os.makedirs(self.cache_dir, exist_ok=True)

    @property
    def endpoint_id(self) -> str:
        return self.inner.endpoint_id

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, key + ".json")

    def complete(self, request: ChatRequest) -> ChatResponse:
        if request.role is RoleTag.OPTIMIZER and not self.cache_optimizer:
            return self.inner.complete(request)
        nonce = self.run_nonce if request.role is RoleTag.OPTIMIZER else ""
        key = cache_key(self.inner.endpoint_id, request, nonce=nonce)
        path = self._path(key)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                stored = json.load(fh)
            return ChatResponse(
                text=stored["text"],
                usage=Usage(**stored.get("usage", {})),
                from_cache=True,
            )
        response = self.inner.complete(request)
        body = json.dumps(
            {
                "text": response.text,
                "usage": {
                    "prompt_tokens": response.usage.prompt_tokens,
                    "completion_tokens": response.usage.completion_tokens,
                },
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        # Atomic publish: concurrent writers race safely, last write wins with
        # a complete file either way.
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(body)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return response


class RecordingProvider(Provider):
    """Wraps a provider and appends every exchange to a JSONL transcript."""

    def __init__(self, inner: Provider, path: str | os.PathLike):
        self.inner = inner
        self.path = str(path)
        self._lock = threading.Lock()

    @property
    def endpoint_id(self) -> str:
        return self.inner.endpoint_id

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        record = {
            "key": cache_key(self.inner.endpoint_id, request),
            "endpoint": self.inner.endpoint_id,
            "role": request.role.value,
            "system_prompt": request.system_prompt,
            "user_content": request.user_content,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "text": response.text,
            "usage": {
                "prompt_tokens": response.usage.prompt_tokens,
                "completion_tokens": response.usage.completion_tokens,
            },
        }
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class TranscriptReplayProvider(Provider):
    """Replays a recorded transcript: same request digest, same response text.

    When the same digest was recorded multiple times the recorded responses
    are replayed in order, then the last one repeats.
    """

    endpoint_id = "replay"

    def __init__(self, records: Sequence[Mapping]):
        self._queues: dict[str, list[dict]] = {}
        self._endpoints: list[str] = []
        for rec in records:
            self._queues.setdefault(rec["key"], []).append(dict(rec))
            endpoint = rec.get("endpoint", "provider")
            if endpoint not in self._endpoints:
                self._endpoints.append(endpoint)
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "TranscriptReplayProvider":
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        return cls(records)

    def complete(self, request: ChatRequest) -> ChatResponse:
        # The digest binds the endpoint the transcript was recorded against,
        # so recompute it with each recorded endpoint id (normally just one).
        with self._lock:
            self.requests.append(request)
            for endpoint in self._endpoints:
                key = cache_key(endpoint, request)
                queue = self._queues.get(key)
                if queue:
                    rec = queue.pop(0) if len(queue) > 1 else queue[0]
                    usage = rec.get("usage", {})
                    return ChatResponse(text=rec["text"], usage=Usage(**usage))
        preview = request.user_content[:120].replace("\n", " ")
        raise NotScriptedError(f"request not in transcript: role={request.role.value} content={preview!r}")


def load_script(path: str | os.PathLike) -> ScriptedProvider:
    """Load a JSONL mock script: {"role", "match", "response"} per line."""
    entries: list[ScriptEntry] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                entries.append(ScriptEntry.make(rec["role"], rec.get("match", ()), rec["response"]))
            except (KeyError, ValueError) as exc:
                raise ProviderError(f"{path}:{lineno}: bad script entry ({exc})") from exc
    return ScriptedProvider(entries)


def save_script(entries: Iterable[ScriptEntry], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(
                json.dumps(
                    {"role": entry.role.value, "match": list(entry.match), "response": entry.response},
                    ensure_ascii=False,
                )
                + "\n"
            )


def provider_from_file(path: str | os.PathLike) -> Provider:
    """Open a mock source: a match script or a recorded transcript, by shape."""
    with open(path, encoding="utf-8") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
    if not first:
        raise ProviderError(f"{path}: empty mock file")
    record = json.loads(first)
    if "response" in record:
        return load_script(path)
    if "key" in record and "text" in record:
        return TranscriptReplayProvider.from_file(path)
    raise ProviderError(f"{path}: unrecognized mock file shape")
