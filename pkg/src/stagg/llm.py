"""Prompt construction and candidate retrieval from a chat-completion API or
a recorded reply on disk."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import AuthError, FixtureMissing, LlmError, NetworkError, RateLimited

log = logging.getLogger(__name__)

DEFAULT_ROLE = "You are a scientific assistant that knows a lot about transpilation"
PROMPT_TEMPLATE = (
    "You are a scientific assistant that knows a lot about transpilation. "
    "Translate the following C code to an expression in the TACO tensor index notation. "
    "The expression must be valid as input to the taco compiler. "
    "Return a list with 10 possible expressions. "
    "Return the list and only the list, no explanations. "
)
ENV_ENDPOINT = "STAGG_LLM_ENDPOINT"
ENV_KEY = "STAGG_LLM_API_KEY"
ENV_MODEL = "STAGG_LLM_MODEL"
MAX_ATTEMPTS = 2


@dataclass(frozen=True)
class LlmConfig:
    backend: str = "fixture"
    fixture_path: Path | None = None
    endpoint: str | None = None
    model: str = "gpt-4"
    api_key_env: str = ENV_KEY
    temperature: float = 1.0
    role: str = DEFAULT_ROLE
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.backend not in ("fixture", "live"):
            raise ValueError(f"unknown LLM backend {self.backend!r}")
        if self.backend == "live" and not self.endpoint:
            raise ValueError(f"live backend needs an endpoint (set {ENV_ENDPOINT})")

    @classmethod
    def from_env(cls, **overrides) -> "LlmConfig":
        values = {
            "backend": "live",
            "endpoint": os.environ.get(ENV_ENDPOINT),
            "model": os.environ.get(ENV_MODEL, "gpt-4"),
        }
        values.update(overrides)
        return cls(**values)


def build_prompt(c_source: str) -> str:
    if not c_source.strip():
        log.warning("building a prompt for empty source")
    return PROMPT_TEMPLATE + "\n" + c_source


def _read_fixture(cfg: LlmConfig) -> str:
    if cfg.fixture_path is None:
        raise FixtureMissing("fixture backend without a fixture path")
    path = Path(cfg.fixture_path)
    if not path.is_file():
        raise FixtureMissing(f"no fixture at {path}")
    return path.read_text()


def _reply_text(response: httpx.Response) -> str:
    if response.status_code in (401, 403):
        raise AuthError(f"endpoint refused credentials (HTTP {response.status_code})")
    if response.status_code == 429:
        retry = response.headers.get("retry-after")
        try:
            seconds = float(retry) if retry is not None else None
        except ValueError:
            seconds = None
        raise RateLimited("rate limited by endpoint", retry_after=seconds)
    if response.status_code >= 400:
        raise LlmError(f"endpoint returned HTTP {response.status_code}")
    try:
        return response.json()["choices"][0]["message"]["content"] or ""
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise LlmError(f"unexpected reply shape: {exc}") from exc


def fetch_candidates(prompt: str, cfg: LlmConfig, client: httpx.Client | None = None) -> str:
    """Raw assistant text for ``prompt``.

    The fixture backend returns the file verbatim.  The live backend sends a
    single chat request and only asks again if the reply comes back empty.
    """
    if cfg.backend == "fixture":
        return _read_fixture(cfg)

    key = os.environ.get(cfg.api_key_env)
    if not key:
        raise AuthError(f"no API key in ${cfg.api_key_env}")
    payload = {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": cfg.role},
            {"role": "user", "content": prompt},
        ],
    }
    headers = {"Authorization": f"Bearer {key}"}
    own_client = client is None
    client = client or httpx.Client(timeout=cfg.timeout)
    try:
        text = ""
        for _ in range(MAX_ATTEMPTS):
            try:
                response = client.post(cfg.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                raise NetworkError(f"request to LLM endpoint failed: {exc}") from exc
            text = _reply_text(response)
            if text.strip():
                break
            log.warning("empty reply from LLM endpoint")
        return text
    finally:
        if own_client:
            client.close()
