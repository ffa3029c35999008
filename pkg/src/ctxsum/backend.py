"""Uniform text-completion interface: a deterministic mock and a generic
HTTP chat-completions endpoint with retry, timeout, and bounded parallelism.

The wire schema is the widely used chat-completions JSON shape (messages
array in, choices[0] text out); see docs/wire.md. API keys are read only
from the environment variable named in the config.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field

import requests

from .promptgen import CALLER_SOURCE_SEPARATOR, RenderedPrompt, templates
from .tokens import count_tokens

__all__ = [
    "BackendConfig",
    "CompletionResult",
    "BackendError",
    "TransportError",
    "RequestError",
    "AuthError",
    "ProtocolError",
    "Backend",
    "complete",
    "mock_complete",
    "load_backend_configs",
    "builtin_mock_config",
]

TRANSIENT_STATUS = frozenset({429, 500, 502, 503, 504})
BACKOFF_BASE_MS = 500
BACKOFF_FACTOR = 2


class BackendError(Exception):
    pass


class TransportError(BackendError):
    """Network failure or retry budget exhausted; carries the attempt log."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(f"{message}; attempts: {attempts}")
        self.attempts = attempts


class RequestError(BackendError):
    """Non-transient HTTP 4xx."""

    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class AuthError(RequestError):
    pass


class ProtocolError(BackendError):
    """Malformed response body; carries a raw excerpt."""

    def __init__(self, body: str):
        super().__init__(f"unexpected response shape: {body[:200]!r}")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"                 # "mock" | "http"
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 256
    timeout_ms: int = 30000
    max_retries: int = 3
    parallelism: int = 1
    long_window: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not (self.endpoint_url and self.model_name):
            raise ValueError("http backends require endpoint_url and model_name")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass
class CompletionResult:
    text: str
    latency_ms: int
    attempts: int
    prompt_tokens: int | None = None
    output_tokens: int | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if not self.text and not self.warnings:
            self.warnings.append("backend returned empty text")


# ---------------------------------------------------------------------------
# Deterministic mock

_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")

_JAVA_RESERVED = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null""".split()
)

_T = templates()
_A_PREFIX = _T["caller_descriptions"].split("{context}")[0]
_B_PREFIX = _T["why"].split("{target code}")[0]
_B_MIDDLE = _T["why"].split("{target code}")[1].split("{descriptions}")[0]


def _first_identifier(text: str) -> str:
    for match in _IDENT_RE.finditer(text):
        if match.group(0) not in _JAVA_RESERVED:
            return match.group(0)
    return "nothing"


def _describe_sentence(method_source: str) -> str:
    ident = _first_identifier(method_source)
    return f"describes {ident} with {count_tokens(method_source)} tokens."


def _digest_sentence(target_source: str) -> str:
    idents = _IDENT_RE.findall(target_source)[:6]
    digest = " ".join(idents) if idents else "nothing"
    return f"This method is used to {digest} ."


def mock_complete(prompt: RenderedPrompt) -> CompletionResult:
    """Pure function of the prompt bytes.

    Caller-description prompts get one sentence per embedded method of the
    form `describes <first identifier> with <n> tokens.`; why-style prompts
    get `This method is used to <digest> .` where the digest is the first
    six identifier tokens of the target.
    """
    text = prompt.text
    if text.startswith(_A_PREFIX):
        context = text[len(_A_PREFIX):]
        sources = context.split(CALLER_SOURCE_SEPARATOR)
        body = "\n".join(_describe_sentence(src) for src in sources)
    elif text.startswith(_B_PREFIX):
        rest = text[len(_B_PREFIX):]
        target = rest.split(_B_MIDDLE, 1)[0]
        body = _digest_sentence(target)
    elif text.startswith("TDAT\n"):
        rest = text[len("TDAT\n"):]
        if "\nCONTEXT\n" in rest:
            target = rest.split("\nCONTEXT\n", 1)[0]
            body = _digest_sentence(target)
        else:
            target = rest.split("\nSUMMARY\n", 1)[0]
            body = _describe_sentence(target)
    else:
        body = _describe_sentence(text)
    return CompletionResult(
        text=body,
        latency_ms=0,
        attempts=1,
        prompt_tokens=prompt.token_count,
        output_tokens=count_tokens(body),
    )


# ---------------------------------------------------------------------------
# HTTP backend


class Backend:
    """Shareable completion handle; in-flight requests are bounded by a
    counting gate sized to the configured parallelism."""

    def __init__(self, cfg: BackendConfig, sleeper=time.sleep, rng: random.Random | None = None):
        self.cfg = cfg
        self._sleep = sleeper
        self._rng = rng or random.Random()
        self._gate = threading.BoundedSemaphore(cfg.parallelism)

    def complete(self, prompt: RenderedPrompt) -> CompletionResult:
        if self.cfg.kind == "mock":
            return mock_complete(prompt)
        with self._gate:
            return self._complete_http(prompt)

    def _complete_http(self, prompt: RenderedPrompt) -> CompletionResult:
        cfg = self.cfg
        headers = {"Content-Type": "application/json"}
        if cfg.api_key_env:
            key = os.environ.get(cfg.api_key_env)
            if not key:
                raise BackendError(
                    f"environment variable {cfg.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        attempts_log: list[str] = []
        started = time.monotonic()
        for attempt in range(cfg.max_retries + 1):
            try:
                response = requests.post(
                    cfg.endpoint_url,
                    headers=headers,
                    json=payload,
                    timeout=cfg.timeout_ms / 1000.0,
                )
            except requests.RequestException as exc:
                attempts_log.append(f"network error: {exc}")
                if attempt == cfg.max_retries:
                    raise TransportError("network failure", attempts_log) from exc
                self._backoff(attempt)
                continue
            if response.status_code in TRANSIENT_STATUS:
                attempts_log.append(f"HTTP {response.status_code}")
                if attempt == cfg.max_retries:
                    raise TransportError("retries exhausted", attempts_log)
                self._backoff(attempt)
                continue
            if 400 <= response.status_code < 500:
                cls = AuthError if response.status_code in (401, 403) else RequestError
                raise cls(response.status_code, response.text)
            latency = int((time.monotonic() - started) * 1000)
            return self._parse_body(response.text, latency, attempt + 1)
        raise TransportError("retries exhausted", attempts_log)

    def _backoff(self, attempt: int) -> None:
        # exponential backoff with full jitter
        ceiling = BACKOFF_BASE_MS * (BACKOFF_FACTOR ** attempt) / 1000.0
        self._sleep(self._rng.uniform(0, ceiling))

    def _parse_body(self, body: str, latency_ms: int, attempts: int) -> CompletionResult:
        try:
            obj = json.loads(body)
            choice = obj["choices"][0]
            text = (
                choice["message"]["content"]
                if "message" in choice
                else choice["text"]
            )
            if not isinstance(text, str):
                raise TypeError
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(body) from exc
        usage = obj.get("usage", {})
        return CompletionResult(
            text=text,
            latency_ms=latency_ms,
            attempts=attempts,
            prompt_tokens=usage.get("prompt_tokens"),
            output_tokens=usage.get("completion_tokens"),
        )


def complete(cfg: BackendConfig, prompt: RenderedPrompt) -> CompletionResult:
    return Backend(cfg).complete(prompt)


# ---------------------------------------------------------------------------
# Config files


def load_backend_configs(path: str) -> dict[str, BackendConfig]:
    """Load a TOML or JSON document mapping backend names to configs."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        doc = json.loads(raw.decode("utf-8"))
    else:
        import tomli

        doc = tomli.loads(raw.decode("utf-8"))
    table = doc.get("backends", doc)
    configs: dict[str, BackendConfig] = {}
    for name, entry in table.items():
        configs[name] = BackendConfig(name=name, **entry)
    return configs


def builtin_mock_config() -> BackendConfig:
    return BackendConfig(kind="mock", name="mock", long_window=True)
