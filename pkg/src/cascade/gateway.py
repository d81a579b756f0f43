"""Model gateways: live HTTP calls, scripted responders and cassette replay.

A gateway turns a prompt envelope into a ``ModelResponse``. The live
implementation speaks the common chat-completions wire shape; a recording
wrapper captures every exchange into a cassette file that the replay
gateway can serve back verbatim, keyed by a request fingerprint.

Cassette format: JSON lines. The first line is a header, each following
line one recorded exchange, and the final line a digest over everything
before it so truncation or edits are detected at load time.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .agents import GenerationParams, PromptEnvelope
from .errors import CassetteMiss, CorruptCassette, GatewayError

CASSETTE_VERSION = 1
GENERIC_ENV_PREFIX = "CASCADE"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_fingerprint(
    envelope: PromptEnvelope, params: GenerationParams, model_id: str
) -> str:
    payload = {
        "envelope": envelope.to_dict(),
        "params": params.wire_dict(),
        "model_id": model_id,
    }
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ModelResponse:
    text: str
    model_id: str
    provider: str
    latency_ms: float = 0.0
    token_usage: dict = field(default_factory=dict)


class Gateway(Protocol):
    def complete(
        self, envelope: PromptEnvelope, params: GenerationParams, model_id: str
    ) -> ModelResponse: ...


# --- cassette ---------------------------------------------------------------

@dataclass
class CassetteEntry:
    fingerprint: str
    text: str
    latency_ms: float
    token_usage: dict
    hits: int = 1

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "text": self.text,
            "latency_ms": self.latency_ms,
            "token_usage": self.token_usage,
            "hits": self.hits,
        }


class Cassette:
    """Ordered store of recorded exchanges with an integrity digest.

    Consecutive identical responses to the same fingerprint are collapsed
    into one entry with a hit count, so tight refinement loops do not bloat
    the file.
    """

    def __init__(self, entries: list[CassetteEntry] | None = None):
        self.entries: list[CassetteEntry] = entries or []

    def record(self, fingerprint: str, response: ModelResponse) -> None:
        if self.entries:
            last = self.entries[-1]
            if last.fingerprint == fingerprint and last.text == response.text:
                last.hits += 1
                return
        self.entries.append(
            CassetteEntry(
                fingerprint=fingerprint,
                text=response.text,
                latency_ms=response.latency_ms,
                token_usage=dict(response.token_usage),
            )
        )

    def save(self, path: str | Path) -> None:
        lines = [canonical_json({"kind": "cassette", "version": CASSETTE_VERSION})]
        lines.extend(canonical_json(e.to_dict()) for e in self.entries)
        body = "\n".join(lines)
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        Path(path).write_text(
            body + "\n" + canonical_json({"digest": digest}) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CorruptCassette(f"cannot read cassette: {exc}") from exc
        # strictly \n-delimited: responses may carry stray unicode line
        # separators that splitlines() would treat as entry boundaries
        lines = raw.removesuffix("\n").split("\n")
        if len(lines) < 2:
            raise CorruptCassette("cassette shorter than header plus digest")
        try:
            header = json.loads(lines[0])
            trailer = json.loads(lines[-1])
        except json.JSONDecodeError as exc:
            raise CorruptCassette(f"unparsable cassette line: {exc}") from exc
        if header.get("kind") != "cassette":
            raise CorruptCassette("missing cassette header")
        if header.get("version") != CASSETTE_VERSION:
            raise CorruptCassette(f"unsupported cassette version {header.get('version')}")
        if "digest" not in trailer:
            raise CorruptCassette("cassette is truncated: no digest line")
        body = "\n".join(lines[:-1])
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if digest != trailer["digest"]:
            raise CorruptCassette("cassette digest mismatch")

        entries = []
        for line_no, line in enumerate(lines[1:-1], start=2):
            try:
                data = json.loads(line)
                entries.append(
                    CassetteEntry(
                        fingerprint=data["fingerprint"],
                        text=data["text"],
                        latency_ms=data["latency_ms"],
                        token_usage=data["token_usage"],
                        hits=data["hits"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorruptCassette(f"bad cassette entry on line {line_no}: {exc}") from exc
        return cls(entries)


# --- gateways ---------------------------------------------------------------

class ScriptedGateway:
    """Deterministic gateway driven by a pure ``responder`` callable."""

    def __init__(self, responder: Callable[[PromptEnvelope, GenerationParams, str], str]):
        self._responder = responder

    def complete(
        self, envelope: PromptEnvelope, params: GenerationParams, model_id: str
    ) -> ModelResponse:
        return ModelResponse(
            text=self._responder(envelope, params, model_id),
            model_id=model_id,
            provider="Scripted",
        )


class ReplayGateway:
    """Serve recorded responses back, in recording order per fingerprint."""

    def __init__(self, cassette: Cassette):
        self._lock = threading.Lock()
        self._queues: dict[str, list[CassetteEntry]] = {}
        for entry in cassette.entries:
            self._queues.setdefault(entry.fingerprint, []).append(entry)
        self._cursors: dict[str, tuple[int, int]] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayGateway":
        return cls(Cassette.load(path))

    def complete(
        self, envelope: PromptEnvelope, params: GenerationParams, model_id: str
    ) -> ModelResponse:
        fingerprint = request_fingerprint(envelope, params, model_id)
        with self._lock:
            queue = self._queues.get(fingerprint)
            if not queue:
                raise CassetteMiss(fingerprint)
            index, served = self._cursors.get(fingerprint, (0, 0))
            entry = queue[index]
            served += 1
            if served >= entry.hits and index + 1 < len(queue):
                index, served = index + 1, 0
            self._cursors[fingerprint] = (index, served)
        return ModelResponse(
            text=entry.text,
            model_id=model_id,
            provider="Replay",
            latency_ms=entry.latency_ms,
            token_usage=dict(entry.token_usage),
        )


class RecordingGateway:
    """Wrap another gateway and capture every exchange into a cassette file."""

    def __init__(self, inner: Gateway, cassette_path: str | Path):
        self._inner = inner
        self._path = Path(cassette_path)
        self._cassette = Cassette()
        self._lock = threading.Lock()

    def complete(
        self, envelope: PromptEnvelope, params: GenerationParams, model_id: str
    ) -> ModelResponse:
        response = self._inner.complete(envelope, params, model_id)
        fingerprint = request_fingerprint(envelope, params, model_id)
        with self._lock:
            self._cassette.record(fingerprint, response)
        return response

    def flush(self) -> None:
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._cassette.save(self._path)

    def __enter__(self) -> "RecordingGateway":
        return self

    def __exit__(self, *exc_info) -> None:
        self.flush()


class RateLimiter:
    """Token bucket; ``acquire`` blocks until a request slot is available."""

    def __init__(self, rate_per_s: float, burst: int = 1, clock=time.monotonic, sleep=time.sleep):
        if rate_per_s <= 0:
            raise ValueError("rate_per_s must be positive")
        self._rate = rate_per_s
        self._capacity = max(1, burst)
        self._tokens = float(self._capacity)
        self._clock = clock
        self._sleep = sleep
        self._updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(
                    self._capacity, self._tokens + (now - self._updated) * self._rate
                )
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            self._sleep(wait)


def _env_name(model_id: str, suffix: str) -> str:
    sanitized = "".join(c if c.isalnum() else "_" for c in model_id).upper()
    return f"{sanitized}_{suffix}"


def resolve_credentials(model_id: str) -> tuple[str | None, str | None]:
    """API key and base URL from the environment, model-specific first."""
    key = os.environ.get(_env_name(model_id, "API_KEY")) or os.environ.get(
        f"{GENERIC_ENV_PREFIX}_API_KEY"
    )
    base = os.environ.get(_env_name(model_id, "API_BASE")) or os.environ.get(
        f"{GENERIC_ENV_PREFIX}_API_BASE"
    )
    return key, base


class LiveGateway:
    """Chat-completions HTTP gateway.

    The role text rides as the system message; the full five-field prompt is
    the single user message. Transport failures and 5xx responses are
    retried with exponential backoff up to ``params.retry_limit`` extra
    attempts, everything else fails fast.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        session=None,
        timeout_s: float = 120.0,
        rate_limiter: RateLimiter | None = None,
        backoff_base_s: float = 0.5,
        sleep=time.sleep,
    ):
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self._base_url = base_url
        self._api_key = api_key
        self._timeout_s = timeout_s
        self._rate_limiter = rate_limiter
        self._backoff_base_s = backoff_base_s
        self._sleep = sleep

    def _endpoint(self, model_id: str) -> tuple[str, dict]:
        key, base = resolve_credentials(model_id)
        base_url = self._base_url or base
        if not base_url:
            raise GatewayError("request", f"no API base configured for {model_id!r}")
        api_key = self._api_key or key
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return base_url.rstrip("/") + "/chat/completions", headers

    def complete(
        self, envelope: PromptEnvelope, params: GenerationParams, model_id: str
    ) -> ModelResponse:
        url, headers = self._endpoint(model_id)
        messages = []
        if envelope.role_text:
            messages.append({"role": "system", "content": envelope.role_text})
        messages.append({"role": "user", "content": envelope.serialize()})
        payload = {
            "model": model_id,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        if params.seed is not None:
            payload["seed"] = params.seed

        import requests

        last_error = "no attempt made"
        for attempt in range(params.retry_limit + 1):
            if attempt:
                self._sleep(self._backoff_base_s * (2 ** (attempt - 1)))
            if self._rate_limiter is not None:
                self._rate_limiter.acquire()
            started = time.perf_counter()
            try:
                http = self._session.post(
                    url, json=payload, headers=headers, timeout=self._timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                continue
            latency_ms = (time.perf_counter() - started) * 1000.0
            if http.status_code >= 500:
                last_error = f"server error {http.status_code}"
                continue
            if http.status_code != 200:
                raise GatewayError(
                    "request", f"status {http.status_code}: {http.text[:300]}"
                )
            try:
                body = http.json()
                text = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise GatewayError("response", f"malformed completion body: {exc}") from exc
            if not isinstance(text, str):
                raise GatewayError("response", "completion content is not text")
            return ModelResponse(
                text=text,
                model_id=model_id,
                provider="Live",
                latency_ms=latency_ms,
                token_usage=body.get("usage") or {},
            )
        raise GatewayError("request", f"retries exhausted: {last_error}")
