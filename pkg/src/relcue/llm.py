"""Chat-completion client with a content-addressed on-disk cache.

Every request is digested over its canonical serialization; the response is
stored once under ``<digest>.json`` and replayed from disk forever after.
Offline mode never touches the network, which is what makes evaluation runs
reproducible after a single warm-up pass.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

from .errors import AuthError, CacheMiss, HttpError, LlmUnavailable, ParseFailure
from .fsio import atomic_write_text

ENV_ENDPOINT = "LLM_ENDPOINT"
ENV_API_KEY = "LLM_API_KEY"
ENV_MODEL = "LLM_MODEL"
DEFAULT_MODEL = "gpt-3.5-turbo"

RETRY_ATTEMPTS = 3
RETRY_DELAYS = (1.0, 2.0, 4.0)

# transport(url, headers, payload) -> (status_code, body_text)
Transport = Callable[[str, dict[str, str], dict], tuple[int, str]]


@dataclass(frozen=True)
class LlmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    cached: bool
    request_digest: str


def default_model() -> str:
    return os.environ.get(ENV_MODEL, DEFAULT_MODEL)


def cache_key(req: LlmRequest) -> str:
    canonical = json.dumps(
        {
            "max_tokens": req.max_tokens,
            "model": req.model,
            "prompt": req.prompt,
            "temperature": req.temperature,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _http_transport(url: str, headers: dict[str, str], payload: dict) -> tuple[int, str]:
    response = httpx.post(url, headers=headers, json=payload, timeout=120.0)
    return response.status_code, response.text


class LlmClient:
    def __init__(
        self,
        cache_dir: Path,
        endpoint: str | None = None,
        api_key: str | None = None,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.cache_dir = Path(cache_dir)
        self.endpoint = endpoint if endpoint is not None else os.environ.get(ENV_ENDPOINT)
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        self.transport = transport or _http_transport
        self.sleep = sleep
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, digest: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(digest, threading.Lock())

    def _cache_path(self, digest: str) -> Path:
        return self.cache_dir / f"{digest}.json"

    def _read_cache(self, digest: str) -> str | None:
        path = self._cache_path(digest)
        if not path.exists():
            return None
        record = json.loads(path.read_text(encoding="utf-8"))
        return record["response"]

    def _write_cache(self, digest: str, req: LlmRequest, text: str) -> None:
        path = self._cache_path(digest)
        if path.exists():
            return
        record = {
            "request": {
                "model": req.model,
                "prompt": req.prompt,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            },
            "response": text,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        atomic_write_text(path, json.dumps(record, sort_keys=True, indent=2, ensure_ascii=True) + "\n")

    def complete(self, req: LlmRequest, mode: str = "offline") -> LlmResponse:
        if mode not in ("online", "offline"):
            raise ValueError(f"unknown mode {mode!r}")
        digest = cache_key(req)
        cached = self._read_cache(digest)
        if cached is not None:
            return LlmResponse(text=cached, cached=True, request_digest=digest)
        if mode == "offline":
            raise CacheMiss(f"no cached response for digest {digest}")
        with self._lock_for(digest):
            cached = self._read_cache(digest)
            if cached is not None:
                return LlmResponse(text=cached, cached=True, request_digest=digest)
            text = self._fetch(req)
            self._write_cache(digest, req, text)
        return LlmResponse(text=text, cached=False, request_digest=digest)

    def _fetch(self, req: LlmRequest) -> str:
        if not self.endpoint:
            raise LlmUnavailable(f"no endpoint configured (set {ENV_ENDPOINT})")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        status, body = 0, ""
        for attempt in range(RETRY_ATTEMPTS):
            status, body = self.transport(self.endpoint, headers, payload)
            if status in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {status})")
            if status == 429 or status >= 500:
                if attempt + 1 < RETRY_ATTEMPTS:
                    self.sleep(RETRY_DELAYS[attempt])
                continue
            if status != 200:
                raise HttpError(status, body[:200])
            return _extract_text(body)
        raise HttpError(status, body[:200])


def _extract_text(body: str) -> str:
    try:
        parsed = json.loads(body)
        text = parsed["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise ParseFailure(f"malformed completion response: {exc}") from exc
    if not isinstance(text, str):
        raise ParseFailure("completion content is not text")
    return text
