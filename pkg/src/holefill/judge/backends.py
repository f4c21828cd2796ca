"""Judging backends. Each maps (prompt, key, sampling) to raw response text."""

from __future__ import annotations

import hashlib
import logging
import os
import time
from collections.abc import Callable
from dataclasses import dataclass

import httpx

from ..collection import Grade, JudgmentKey, Qrels
from .errors import BackendError, OracleMiss
from .prompts import prompt_hash

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    top_p: float = 1.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")


class Backend:
    backend_id: str = "backend"
    deterministic: bool = True

    def complete(self, prompt: str, key: JudgmentKey, sampling: SamplingParams) -> str:
        raise NotImplementedError


def _qrels_digest(qrels: Qrels) -> str:
    h = hashlib.sha256()
    for key, grade in qrels.items():
        h.update(f"{key.topic_id}\t{key.doc_id}\t{int(grade)}\n".encode())
    return h.hexdigest()[:12]


class OracleBackend(Backend):
    """Answers with the reference grade; keys outside the reference are an error."""

    def __init__(self, reference: Qrels):
        self.reference = reference
        self.backend_id = f"oracle:{_qrels_digest(reference)}"

    def complete(self, prompt, key, sampling):
        try:
            return str(int(self.reference[key]))
        except KeyError:
            raise OracleMiss(f"oracle has no judgment for {key}") from None


class ConstantBackend(Backend):
    def __init__(self, grade: int):
        self.grade = Grade.of(grade)
        self.backend_id = f"constant:{int(self.grade)}"

    def complete(self, prompt, key, sampling):
        return str(int(self.grade))


class MockBackend(Backend):
    """Pseudo-random but reproducible grade derived from the prompt hash and seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.backend_id = f"mock:{self.seed}"

    def complete(self, prompt, key, sampling):
        digest = hashlib.sha256(f"{self.seed}:{prompt_hash(prompt)}".encode()).digest()
        return str(int.from_bytes(digest[:8], "big") % 5)


@dataclass(frozen=True)
class ChatConfig:
    endpoint: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 5
    backoff_base: float = 1.0
    backoff_max: float = 30.0

    @property
    def url(self) -> str:
        url = self.endpoint.rstrip("/")
        return url if url.endswith("/chat/completions") else url + "/chat/completions"


_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ChatBackend(Backend):
    """OpenAI-compatible chat-completion client with exponential-backoff retries.

    The auth token is read from the environment variable named by
    ``config.api_key_env``; it is never taken from configuration files.
    """

    deterministic = False

    def __init__(self, config: ChatConfig, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.backend_id = f"chat:{config.model}@{config.url}"
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def payload(self, prompt: str, sampling: SamplingParams) -> dict:
        return {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
        }

    def complete(self, prompt, key, sampling):
        body = self.payload(prompt, sampling)
        attempts = self.config.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                delay = min(self.config.backoff_max, self.config.backoff_base * 2 ** (attempt - 1))
                logger.info("retrying %s in %.1fs (%s)", key, delay, last_error)
                self._sleep(delay)
            try:
                resp = self._client.post(self.config.url, json=body, headers=self._headers())
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code} from {self.config.url}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed chat completion response: {exc!r}") from None
        raise BackendError(f"gave up on {key} after {attempts} attempts: {last_error}")
