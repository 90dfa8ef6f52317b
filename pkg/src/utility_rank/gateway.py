"""Chat-completion gateway: one live OpenAI-compatible client, one
deterministic mock provider, a disk cache, and bounded parallel fan-out.

The mock provider makes the whole pipeline runnable offline: its responses
are a pure function of (request, fixture), so repeated runs are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import httpx

from . import corpus
from .errors import AuthenticationError, ProviderError, ValidationError
from .text import tokenize

ROLE_TAGS = ("trace", "annotate", "relevance", "answer")

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_BASE_URL_ENV = "OPENAI_BASE_URL"


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``metadata`` carries pipeline context (question_id, passage_id) used by
    the mock provider's fixture rules; live providers never send it.
    """

    role_tag: str
    prompt: str
    max_output: int = 1024
    temperature: float = 0.0
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.role_tag not in ROLE_TAGS:
            raise ValidationError(f"unknown role_tag {self.role_tag!r}")
        if not self.prompt:
            raise ValidationError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    provider_id: str
    latency: float


class Provider:
    """Base interface for chat-completion providers."""

    provider_id: str = "provider"

    def complete(self, request: ChatRequest, refresh: bool = False) -> ChatResponse:
        raise NotImplementedError

    def fingerprint(self, request: ChatRequest) -> dict:
        """Stable request identity used as the cache key."""
        return {
            "provider": self.provider_id,
            "role_tag": request.role_tag,
            "prompt": request.prompt,
            "max_output": request.max_output,
            "temperature": request.temperature,
        }


# --- live provider ----------------------------------------------------------

class OpenAICompatibleProvider(Provider):
    """Client for any OpenAI-compatible /chat/completions endpoint.

    Transient failures (transport errors, 408/429/5xx) are retried with
    exponential backoff up to ``retry_limit`` attempts; credential rejection
    and malformed payloads fail immediately.
    """

    RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})

    def __init__(
        self,
        base_url: str,
        api_key: str,
        models: Mapping[str, str],
        retry_limit: int = 3,
        timeout: float = 60.0,
        backoff_base: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        if not base_url:
            raise ValidationError("provider base_url is required")
        self.models = dict(models)
        self.retry_limit = max(1, retry_limit)
        self.backoff_base = backoff_base
        self.provider_id = f"openai-compat:{base_url.rstrip('/')}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    def model_for(self, role_tag: str) -> str:
        model = self.models.get(role_tag) or self.models.get("default")
        if not model:
            raise ValidationError(f"no model configured for role {role_tag!r}")
        return model

    def fingerprint(self, request: ChatRequest) -> dict:
        fp = super().fingerprint(request)
        fp["model"] = self.model_for(request.role_tag)
        return fp

    def complete(self, request: ChatRequest, refresh: bool = False) -> ChatResponse:
        payload = {
            "model": self.model_for(request.role_tag),
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        start = time.monotonic()
        last_failure = "no attempt made"
        for attempt in range(1, self.retry_limit + 1):
            try:
                response = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_failure = f"transport error: {exc}"
            else:
                if response.status_code in (401, 403):
                    raise AuthenticationError(
                        f"provider rejected credential (HTTP {response.status_code})"
                    )
                if response.status_code == 200:
                    text = self._extract_text(response)
                    return ChatResponse(
                        text=text,
                        provider_id=self.provider_id,
                        latency=time.monotonic() - start,
                    )
                if response.status_code not in self.RETRYABLE_STATUS:
                    raise ProviderError(
                        f"provider returned HTTP {response.status_code}: {response.text[:200]}"
                    )
                last_failure = f"HTTP {response.status_code}"
            if attempt < self.retry_limit:
                time.sleep(min(self.backoff_base * 2 ** (attempt - 1), 8.0))
        raise ProviderError(
            f"retries exhausted after {self.retry_limit} attempts ({last_failure})"
        )

    @staticmethod
    def _extract_text(response: httpx.Response) -> str:
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider payload: {exc}") from exc
        if text is None:
            raise ProviderError("malformed provider payload: null content")
        return str(text)


# --- disk cache -------------------------------------------------------------

class CachedProvider(Provider):
    """Disk cache around a live provider, keyed by request fingerprint.

    Values are deterministic per key at temperature 0, so concurrent
    last-write-wins on identical keys is harmless.
    """

    def __init__(self, inner: Provider, cache_dir: str | Path):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def fingerprint(self, request: ChatRequest) -> dict:
        return self.inner.fingerprint(request)

    def _path(self, request: ChatRequest) -> Path:
        digest = hashlib.sha256(
            json.dumps(self.fingerprint(request), sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def complete(self, request: ChatRequest, refresh: bool = False) -> ChatResponse:
        path = self._path(request)
        if not refresh and path.exists():
            entry = json.loads(path.read_text(encoding="utf-8"))
            return ChatResponse(text=entry["text"], provider_id=entry["provider_id"], latency=0.0)
        response = self.inner.complete(request, refresh=refresh)
        entry = {
            "fingerprint": self.fingerprint(request),
            "text": response.text,
            "provider_id": response.provider_id,
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)
        return response


# --- mock provider ----------------------------------------------------------

@dataclass(frozen=True)
class MockQuestion:
    """Everything the mock rules need to know about one question."""

    gold_ids: frozenset[str]
    gold_answer: str
    gold_tags: tuple[str, ...]  # original_index order
    passage_tokens: Mapping[str, frozenset[str]]
    answer_tokens: frozenset[str]


@dataclass(frozen=True)
class MockFixture:
    """Deterministic behaviour rules derived from a canonical dataset."""

    answer_key: Mapping[str, MockQuestion]

    @classmethod
    def from_dataset(cls, dataset: corpus.Dataset) -> "MockFixture":
        entries = {}
        for record in dataset:
            tagged = corpus.assign_passage_tags(record.candidates)
            gold_tags = tuple(
                p.tag for p in tagged if p.passage_id in record.gold_passage_ids
            )
            entries[record.question_id] = MockQuestion(
                gold_ids=record.gold_passage_ids,
                gold_answer=record.gold_answers[0],
                gold_tags=gold_tags,
                passage_tokens={
                    p.passage_id: frozenset(tokenize(p.full_text)) for p in tagged
                },
                answer_tokens=frozenset(
                    t for answer in record.gold_answers for t in tokenize(answer)
                ),
            )
        return cls(answer_key=entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockFixture":
        return cls.from_dataset(corpus.load_dataset(path, "canonical"))


class MockProvider(Provider):
    """Offline provider whose replies are a pure function of the fixture."""

    provider_id = "mock"

    def __init__(self, fixture: MockFixture):
        self.fixture = fixture

    def _entry(self, request: ChatRequest) -> MockQuestion:
        qid = request.metadata.get("question_id")
        if qid is None:
            raise ValidationError("mock provider needs question_id metadata")
        entry = self.fixture.answer_key.get(qid)
        if entry is None:
            raise ValidationError(f"question_id {qid!r} absent from mock answer key")
        return entry

    def _passage_id(self, request: ChatRequest) -> str:
        pid = request.metadata.get("passage_id")
        if pid is None:
            raise ValidationError("mock provider needs passage_id metadata")
        return pid

    def complete(self, request: ChatRequest, refresh: bool = False) -> ChatResponse:
        entry = self._entry(request)
        if request.role_tag == "trace":
            lines = [
                f"Step {i}: [Passage {tag}] provides the evidence for this hop."
                for i, tag in enumerate(entry.gold_tags, start=1)
            ]
            lines.append(f"Therefore, the answer is {entry.gold_answer}.")
            text = " ".join(lines)
        elif request.role_tag == "annotate":
            pid = self._passage_id(request)
            score = 5 if pid in entry.gold_ids else 1
            text = f"Utility Score: {score}"
        elif request.role_tag == "relevance":
            pid = self._passage_id(request)
            tokens = entry.passage_tokens.get(pid)
            if tokens is None:
                raise ValidationError(f"passage_id {pid!r} absent from mock answer key")
            score = 5 if tokens & entry.answer_tokens else 2
            text = f"Relevance Score: {score}"
        elif request.role_tag == "answer":
            if all(f"[Passage {tag}]" in request.prompt for tag in entry.gold_tags):
                text = entry.gold_answer
            else:
                text = "unknown"
        else:  # pragma: no cover - ChatRequest already validates role_tag
            raise ValidationError(f"unknown role_tag {request.role_tag!r}")
        return ChatResponse(text=text, provider_id=self.provider_id, latency=0.0)


def mock_provider(fixture: MockFixture) -> MockProvider:
    return MockProvider(fixture)


# --- fan-out ----------------------------------------------------------------

def fan_out(
    provider: Provider,
    requests: Mapping[object, ChatRequest],
    concurrency: int = 1,
) -> dict:
    """Run requests with at most ``concurrency`` in flight.

    Returns {key: ChatResponse | Exception}; output is keyed, so it does not
    depend on completion order.
    """
    results: dict = {}
    if concurrency <= 1:
        for key, request in requests.items():
            try:
                results[key] = provider.complete(request)
            except Exception as exc:  # noqa: BLE001 - collected per key
                results[key] = exc
        return results
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = {key: pool.submit(provider.complete, request) for key, request in requests.items()}
        for key, future in futures.items():
            try:
                results[key] = future.result()
            except Exception as exc:  # noqa: BLE001
                results[key] = exc
    return results


# --- configuration ----------------------------------------------------------

@dataclass
class GatewayConfig:
    """Live-provider settings (config file ``provider`` section + env).

    Caching is on by default: re-runs must not re-spend API calls.
    """

    base_url: Optional[str] = None
    api_key: Optional[str] = None
    api_key_env: str = DEFAULT_API_KEY_ENV
    models: dict = field(default_factory=dict)
    concurrency: int = 4
    retry_limit: int = 3
    timeout: float = 60.0
    cache_dir: Optional[str] = ".utility-rank-cache"

    def resolve_base_url(self) -> str:
        base = self.base_url or os.environ.get(DEFAULT_BASE_URL_ENV)
        if not base:
            raise ValidationError(
                f"no provider base URL: set provider.base_url or ${DEFAULT_BASE_URL_ENV}"
            )
        return base

    def resolve_api_key(self) -> str:
        key = self.api_key or os.environ.get(self.api_key_env)
        if not key:
            raise ValidationError(f"no API key: set provider.api_key or ${self.api_key_env}")
        return key


def build_live_provider(config: GatewayConfig) -> Provider:
    provider: Provider = OpenAICompatibleProvider(
        base_url=config.resolve_base_url(),
        api_key=config.resolve_api_key(),
        models=config.models,
        retry_limit=config.retry_limit,
        timeout=config.timeout,
    )
    if config.cache_dir:
        provider = CachedProvider(provider, config.cache_dir)
    return provider
