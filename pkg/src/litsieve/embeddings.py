"""Embedding providers: a native TF-IDF vectorizer and an HTTP client for
remote transformer encoders (MiniLM, Specter2, or any compatible service)."""

from __future__ import annotations

import logging
import math
import re
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import httpx

from .cache import StageCache, cache_key
from .config import InputQuery
from .errors import (DimensionMismatch, EmptyCorpus, OfflineMiss, PartialResponse,
                     ProviderUnavailable)
from .transport import RetryExhausted, send_with_retry

logger = logging.getLogger(__name__)

REMOTE_PROVIDERS = {"minilm": 384, "specter2": 768, "remote-custom": None}
PROVIDER_IDS = ("tfidf", *REMOTE_PROVIDERS)
BATCH_SIZE = 64

_TOKEN = re.compile(r"[^\W_]{2,}")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding must have dim > 0")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)

    @classmethod
    def of(cls, values: Sequence[float]) -> "EmbeddingVector":
        return cls(tuple(float(v) for v in values))


def text_of(title: str, abstract: str) -> str:
    return f"{title.strip()}\n{abstract.strip()}"


def query_text(query) -> str:
    """Title and abstract joined by a newline; works for queries and papers alike."""
    return text_of(query.title, query.abstract)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


# --- TF-IDF -------------------------------------------------------------

@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.doc_freq[term])) + 1.0


def fit_tfidf(corpus: Sequence[str]) -> TfidfModel:
    if not corpus:
        raise EmptyCorpus("cannot fit TF-IDF on an empty corpus")
    df: Counter[str] = Counter()
    for doc in corpus:
        df.update(set(tokenize(doc)))
    vocab = {term: i for i, term in enumerate(sorted(df))}
    return TfidfModel(vocab, dict(df), len(corpus))


def tfidf_weights(model: TfidfModel, doc: str) -> list[float]:
    """Raw-count tf times smoothed idf, L2-normalized when nonzero."""
    weights = [0.0] * len(model.vocabulary)
    for term, tf in Counter(tokenize(doc)).items():
        col = model.vocabulary.get(term)
        if col is not None:
            weights[col] = tf * model.idf(term)
    norm = math.sqrt(math.fsum(w * w for w in weights))
    if norm > 0:
        weights = [w / norm for w in weights]
    return weights


def tfidf_transform(model: TfidfModel, doc: str) -> EmbeddingVector:
    """Zero vector for all-unknown docs. A model with an empty vocabulary
    yields a one-dimensional zero vector so the cosine layer can reject it."""
    weights = tfidf_weights(model, doc)
    return EmbeddingVector(tuple(weights) if weights else (0.0,))


# --- remote providers ----------------------------------------------------

@dataclass(frozen=True)
class ProviderDescriptor:
    provider_id: str
    endpoint: str | None = None
    expected_dim: int | None = None

    def __post_init__(self) -> None:
        if self.provider_id not in PROVIDER_IDS:
            raise ValueError(f"unknown provider {self.provider_id!r}; expected one of {PROVIDER_IDS}")
        if self.provider_id != "tfidf" and not self.endpoint:
            raise ValueError(f"provider {self.provider_id!r} needs an endpoint (EMBEDDING_API_URL)")

    @property
    def is_remote(self) -> bool:
        return self.provider_id != "tfidf"

    @classmethod
    def resolve(cls, provider_id: str, base_url: str | None = None) -> "ProviderDescriptor":
        """``base_url`` may contain ``{provider}``, substituted with the provider id."""
        if provider_id == "tfidf":
            return cls("tfidf")
        endpoint = base_url.replace("{provider}", provider_id) if base_url else None
        return cls(provider_id, endpoint, REMOTE_PROVIDERS.get(provider_id))


class RemoteEmbedder:
    """Wire format: POST ``{"texts": [...]}`` -> ``{"vectors": [[...], ...]}``.
    Batches are cached under the ``embed`` stage."""

    def __init__(self, http: httpx.Client, cache: StageCache, api_key: str | None = None,
                 batch_size: int = BATCH_SIZE, retries: int = 3,
                 sleep: Callable[[float], None] = time.sleep):
        self.http = http
        self.cache = cache
        self.api_key = api_key
        self.batch_size = batch_size
        self.retries = retries
        self.sleep = sleep

    def _post(self, descriptor: ProviderDescriptor, texts: list[str]) -> list[list[float]]:
        key = cache_key("embed", {"provider": descriptor.provider_id,
                                  "endpoint": descriptor.endpoint, "texts": texts})
        hit = self.cache.get_json("embed", key)
        if hit is not None:
            return hit
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = send_with_retry(self.http, "POST", descriptor.endpoint, json={"texts": texts},
                                   headers=headers, retries=self.retries, sleep=self.sleep)
        except RetryExhausted as exc:
            raise ProviderUnavailable(str(exc)) from exc
        except OfflineMiss:
            raise
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"{descriptor.endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"{descriptor.endpoint}: HTTP {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embedding response: {resp.text[:200]}") from exc
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            got = len(vectors) if isinstance(vectors, list) else "non-list"
            raise PartialResponse(f"{descriptor.provider_id}: sent {len(texts)} texts, got {got} vectors")
        self.cache.put_json("embed", key, vectors)
        return vectors

    def embed(self, descriptor: ProviderDescriptor, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("embed_remote needs at least one text")
        texts = list(texts)
        out: list[EmbeddingVector] = []
        for i in range(0, len(texts), self.batch_size):
            for raw in self._post(descriptor, texts[i:i + self.batch_size]):
                try:
                    out.append(EmbeddingVector.of(raw))
                except (TypeError, ValueError) as exc:
                    raise ProviderUnavailable(f"invalid vector from {descriptor.provider_id}: {exc}") from exc
        dims = {v.dim for v in out}
        if descriptor.expected_dim is not None and dims != {descriptor.expected_dim}:
            raise DimensionMismatch(f"{descriptor.provider_id}: expected dim "
                                    f"{descriptor.expected_dim}, got {sorted(dims)}")
        if len(dims) > 1:
            raise DimensionMismatch(f"{descriptor.provider_id}: mixed dims {sorted(dims)}")
        return out


def embed_remote(descriptor: ProviderDescriptor, texts: Sequence[str], http: httpx.Client,
                 cache: StageCache | None = None, **kwargs) -> list[EmbeddingVector]:
    return RemoteEmbedder(http, cache or StageCache(None), **kwargs).embed(descriptor, texts)


def embed_query_and_corpus(descriptor: ProviderDescriptor, query: InputQuery,
                           corpus_texts: Sequence[str],
                           remote: RemoteEmbedder | None) -> tuple[EmbeddingVector, list[EmbeddingVector]]:
    """Embed the query and all candidates with one provider.

    TF-IDF is fitted on the candidates plus the query, so query terms carry
    document frequencies from the same collection being ranked.
    """
    qtext = query_text(query)
    if descriptor.provider_id == "tfidf":
        model = fit_tfidf([*corpus_texts, qtext])
        return tfidf_transform(model, qtext), [tfidf_transform(model, t) for t in corpus_texts]
    if remote is None:
        raise ProviderUnavailable(f"no remote embedder configured for {descriptor.provider_id}")
    vectors = remote.embed(descriptor, [qtext, *corpus_texts])
    return vectors[0], vectors[1:]
