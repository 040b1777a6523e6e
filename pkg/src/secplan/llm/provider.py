"""Provider-neutral chat and embedding clients.

The wire contract is the de-facto OpenAI-compatible HTTP shape (messages
array in, choices out) because hosted and self-hosted stacks both speak it;
the engine treats it as an opaque contract behind small provider objects.
API keys are resolved from the environment at request time and are never
stored on config objects, sessions, or logs.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Protocol

import requests

from secplan.errors import ProviderError, Timeout

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = ""
    model_name: str = "mock"
    api_key_ref: str = "SECPLAN_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    backoff_base: float = 0.5

    def api_key(self) -> str | None:
        """Resolve the secret from the named env var; never persist it."""
        return os.environ.get(self.api_key_ref)


@dataclass(frozen=True)
class ChatExchange:
    prompt: str
    response: str
    provider: str
    latency: float
    attempt: int


class ChatProvider(Protocol):
    model_name: str

    def complete(self, prompt: str) -> str: ...


def chat(
    provider: ChatProvider,
    prompt: str,
    max_retries: int = 2,
    backoff_base: float = 0.5,
    on_exchange: Callable[[ChatExchange], None] | None = None,
) -> ChatExchange:
    """One completion with retry on retryable failures.

    Retries use exponential backoff (backoff_base * 2**(attempt-1)); the
    terminal error after exhaustion is the provider's last error. Successful
    exchanges are passed to ``on_exchange`` so callers can record them in
    the session event log.
    """
    attempt = 0
    while True:
        attempt += 1
        started = time.monotonic()
        try:
            response = provider.complete(prompt)
        except ProviderError as err:
            if err.retryable and attempt <= max_retries:
                delay = backoff_base * (2 ** (attempt - 1))
                log.warning(
                    "provider call failed (attempt %d/%d): %s; retrying in %.2fs",
                    attempt, max_retries + 1, err.message, delay,
                )
                if delay > 0:
                    time.sleep(delay)
                continue
            raise
        exchange = ChatExchange(
            prompt=prompt,
            response=response,
            provider=provider.model_name,
            latency=time.monotonic() - started,
            attempt=attempt,
        )
        if on_exchange is not None:
            on_exchange(exchange)
        return exchange


def _classify_http_error(status: int, body: str) -> ProviderError:
    retryable = status == 429 or status >= 500
    return ProviderError(
        f"provider returned HTTP {status}: {body[:200]}",
        retryable=retryable,
        details={"status": status},
    )


class HttpChatProvider:
    """OpenAI-compatible /chat/completions client."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self.model_name = config.model_name

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=self.config.timeout)
        except requests.Timeout as exc:
            raise Timeout(f"provider timed out after {self.config.timeout}s") from exc
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure: {exc}", retryable=True) from exc
        if resp.status_code != 200:
            raise _classify_http_error(resp.status_code, resp.text)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


class HttpEmbeddingProvider:
    """OpenAI-compatible /embeddings client with a declared dimension."""

    def __init__(self, config: ProviderConfig, dim: int):
        self.config = config
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.config.endpoint.rstrip("/") + "/embeddings"
        try:
            resp = requests.post(
                url,
                json={"model": self.config.model_name, "input": text},
                headers=headers,
                timeout=self.config.timeout,
            )
        except requests.Timeout as exc:
            raise Timeout(f"embedding provider timed out after {self.config.timeout}s") from exc
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure: {exc}", retryable=True) from exc
        if resp.status_code != 200:
            raise _classify_http_error(resp.status_code, resp.text)
        try:
            return [float(v) for v in resp.json()["data"][0]["embedding"]]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
