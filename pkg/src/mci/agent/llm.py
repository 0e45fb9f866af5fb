"""Chat-completion client: real HTTP endpoint, scripted mock, or nothing."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Protocol

import httpx

ENV_URL = "CA_LLM_URL"
ENV_MODEL = "CA_LLM_MODEL"
ENV_KEY = "CA_LLM_KEY"
ENV_MOCK = "CA_LLM_MOCK"

DEFAULT_TIMEOUT_S = 60.0


class LlmUnreachable(RuntimeError):
    """No LLM configured, or the endpoint failed."""


class LlmClient(Protocol):
    def complete(self, messages: list[dict]) -> str: ...


class HttpLlmClient:
    """OpenAI-style /chat/completions speaker."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s

    def complete(self, messages: list[dict]) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json={"model": self.model, "messages": messages},
                headers=headers,
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise LlmUnreachable(f"LLM endpoint failed: {exc}") from exc


class MockLlmClient:
    """Scripted fixture: an ordered list of {"request"?: substring, "response": str}.

    Each call consumes the next entry; a present "request" must be a
    substring of the final message's content, guarding fixture drift.
    """

    def __init__(self, fixture: str | Path | list[dict]):
        if isinstance(fixture, (str, Path)):
            with open(fixture) as fh:
                fixture = json.load(fh)
        if not isinstance(fixture, list):
            raise ValueError("mock fixture must be a JSON array")
        self.entries = list(fixture)
        self.cursor = 0

    def complete(self, messages: list[dict]) -> str:
        if self.cursor >= len(self.entries):
            raise LlmUnreachable("mock fixture exhausted")
        entry = self.entries[self.cursor]
        self.cursor += 1
        expect = entry.get("request")
        if expect is not None:
            last = messages[-1]["content"] if messages else ""
            if expect not in last:
                raise LlmUnreachable(
                    f"mock fixture mismatch: expected {expect!r} in {last!r}"
                )
        return entry["response"]


class UnconfiguredLlmClient:
    def complete(self, messages: list[dict]) -> str:
        raise LlmUnreachable(
            f"no LLM configured; set {ENV_URL} (+{ENV_MODEL}, {ENV_KEY}) or {ENV_MOCK}"
        )


def client_from_env(env: dict | None = None) -> LlmClient:
    env = os.environ if env is None else env
    mock = env.get(ENV_MOCK)
    if mock:
        return MockLlmClient(mock)
    url = env.get(ENV_URL)
    if url:
        return HttpLlmClient(url, env.get(ENV_MODEL, "default"), env.get(ENV_KEY))
    return UnconfiguredLlmClient()
