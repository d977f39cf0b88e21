"""LLM transport: a chat-completion HTTP client, a fixture client for
offline runs, and a caching wrapper that records replayable transcripts."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from .cache import StageCache, cache_key
from .errors import LlmUnavailable, OfflineMiss
from .transport import RetryExhausted, send_with_retry

logger = logging.getLogger(__name__)


class FinishState(str, Enum):
    COMPLETE = "complete"
    TRUNCATED = "truncated"
    REFUSED = "refused"


@dataclass(frozen=True)
class LlmRequest:
    model_id: str
    prompt: str
    response_format_hint: str = "text"
    # routing metadata; not sent over the wire
    task: str = "generic"
    subject: str | None = None

    def cache_payload(self) -> dict:
        return {"model_id": self.model_id, "prompt": self.prompt,
                "response_format_hint": self.response_format_hint}


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    finish_state: FinishState = FinishState.COMPLETE


class LlmClient(Protocol):
    def complete(self, request: LlmRequest) -> LlmResponse: ...


def load_prompt(name: str) -> str:
    return resources.files("litsieve.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


_FINISH = {"stop": FinishState.COMPLETE, "length": FinishState.TRUNCATED,
           "content_filter": FinishState.REFUSED, "safety": FinishState.REFUSED}


class HttpLlmClient:
    """OpenAI-style ``/chat/completions`` client.

    Request: ``{"model", "messages": [{"role": "user", "content"}]}`` (plus
    ``response_format: {"type": "json_object"}`` for JSON prompts).
    Response: ``{"choices": [{"message": {"content"}, "finish_reason"}]}``.
    """

    def __init__(self, url: str, http: httpx.Client, api_key: str | None = None,
                 retries: int = 3, sleep: Callable[[float], None] = time.sleep):
        self.url = url
        self.http = http
        self.api_key = api_key
        self.retries = retries
        self.sleep = sleep

    def complete(self, request: LlmRequest) -> LlmResponse:
        body: dict = {"model": request.model_id,
                      "messages": [{"role": "user", "content": request.prompt}]}
        if request.response_format_hint == "json":
            body["response_format"] = {"type": "json_object"}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = send_with_retry(self.http, "POST", self.url, json=body, headers=headers,
                                   retries=self.retries, sleep=self.sleep)
        except RetryExhausted as exc:
            raise LlmUnavailable(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise LlmUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise LlmUnavailable(f"{self.url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            choice = resp.json()["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmUnavailable(f"unexpected LLM response body: {resp.text[:200]}") from exc
        state = _FINISH.get(choice.get("finish_reason") or "stop", FinishState.COMPLETE)
        return LlmResponse(text, state)


class FixtureLlmClient:
    """Replays scripted responses, looked up by ``"<task>:<subject>"`` then
    ``"<task>"``. A list value is consumed one item per call; its last item
    repeats once exhausted.
    """

    def __init__(self, responses: Mapping[str, str | list[str]]):
        self.responses = dict(responses)
        self._calls: dict[str, int] = {}
        self.requests: list[LlmRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureLlmClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.requests.append(request)
        for key in (f"{request.task}:{request.subject}", request.task):
            if key in self.responses:
                value = self.responses[key]
                if isinstance(value, list):
                    i = self._calls.get(key, 0)
                    self._calls[key] = i + 1
                    value = value[min(i, len(value) - 1)]
                return LlmResponse(value)
        raise OfflineMiss(f"no fixture LLM response for task {request.task!r} "
                          f"(subject {request.subject!r})")


class CacheOnlyLlmClient:
    """Stand-in for offline runs without fixtures: every uncached call fails."""

    def complete(self, request: LlmRequest) -> LlmResponse:
        raise OfflineMiss(f"offline: LLM call for task {request.task!r} not in cache")


class CachedLlmClient:
    """Stores each exchange as a JSON transcript under the request's task stage."""

    def __init__(self, inner: LlmClient, cache: StageCache):
        self.inner = inner
        self.cache = cache

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = cache_key(request.task, request.cache_payload())
        hit = self.cache.get_json(request.task, key)
        if hit is not None:
            r = hit["response"]
            return LlmResponse(r["raw_text"], FinishState(r["finish_state"]))
        response = self.inner.complete(request)
        self.cache.put_json(request.task, key, {
            "request": {**request.cache_payload(), "task": request.task,
                        "subject": request.subject},
            "response": {**asdict(response), "finish_state": response.finish_state.value},
        })
        return response
