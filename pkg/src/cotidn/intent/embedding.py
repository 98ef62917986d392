"""Intent text encoders.

The default :class:`HashingEmbedder` is an offline bag-of-words encoder:
lowercase the text, split on anything that is not an ASCII letter or digit,
hash each token with 64-bit FNV-1a, and add ``+1`` or ``-1`` (low hash bit
0 or 1) to bucket ``(hash >> 1) % dim``.  The result is L2-normalized.  No
locale or platform state enters the computation.

:class:`HttpEmbedder` talks to an OpenAI-compatible ``/v1/embeddings``
endpoint instead.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx

from ..errors import BackendTimeout, DomainError, TransportError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class IntentText:
    text: str
    id: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise DomainError("intent text is empty")


@dataclass(frozen=True)
class IntentEmbedding:
    vector: tuple[float, ...]
    dim: int
    id: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        if len(self.vector) != self.dim:
            raise DomainError(f"vector length {len(self.vector)} != dim {self.dim}")


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def l2_normalize(vector: Sequence[float]) -> list[float]:
    norm = math.sqrt(math.fsum(v * v for v in vector))
    if norm == 0.0 or not math.isfinite(norm):
        raise DomainError("cannot normalize a zero or non-finite vector")
    return [v / norm for v in vector]


class Embedder(Protocol):
    dim: int

    def embed_many(self, texts: Sequence[str]) -> list[list[float]]: ...


class HashingEmbedder:
    def __init__(self, dim: int = 256) -> None:
        if dim < 1:
            raise DomainError("embedding dim must be positive")
        self.dim = dim

    def embed_one(self, text: str) -> list[float]:
        tokens = tokenize(text)
        if not tokens:
            raise DomainError(f"no tokens in {text!r}")
        vec = [0.0] * self.dim
        for tok in tokens:
            h = fnv1a64(tok.encode("utf-8"))
            vec[(h >> 1) % self.dim] += -1.0 if h & 1 else 1.0
        if not any(vec):
            # every token cancelled out; fall back to unsigned counts
            for tok in tokens:
                vec[(fnv1a64(tok.encode("utf-8")) >> 1) % self.dim] += 1.0
        return l2_normalize(vec)

    def embed_many(self, texts: Sequence[str]) -> list[list[float]]:
        return [self.embed_one(t) for t in texts]


class HttpEmbedder:
    """Client for an OpenAI-compatible embeddings endpoint.

    Requests carry ``{"model": ..., "input": [...]}`` and the reply is read
    from ``data[i].embedding``.  Batches are sent concurrently with at most
    ``max_in_flight`` requests open.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "text-embedding-3-small",
        *,
        timeout_s: float = 60.0,
        retries: int = 2,
        batch_size: int = 32,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = (base_url or os.environ.get("EMBED_API_BASE", "")).rstrip("/")
        if not self.base_url:
            raise DomainError("no embedding endpoint configured (EMBED_API_BASE)")
        self.api_key = api_key if api_key is not None else os.environ.get("EMBED_API_KEY", "")
        self.model = model
        self.timeout_s = timeout_s
        self.retries = retries
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.transport = transport
        self.dim = 0

    def _post(self, batch: Sequence[str]) -> list[list[float]]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {"model": self.model, "input": list(batch)}
        last: TransportError | None = None
        for attempt in range(1, self.retries + 2):
            try:
                with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                    resp = client.post(f"{self.base_url}/v1/embeddings", json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"embedding request timed out: {exc}", attempts=attempt)
                continue
            except httpx.HTTPError as exc:
                last = TransportError(f"embedding request failed: {exc}", attempts=attempt)
                continue
            if resp.status_code // 100 != 2:
                last = TransportError(
                    f"embedding endpoint returned {resp.status_code}", status=resp.status_code, attempts=attempt
                )
                continue
            try:
                data = sorted(resp.json()["data"], key=lambda d: d.get("index", 0))
                return [[float(x) for x in d["embedding"]] for d in data]
            except (ValueError, KeyError, TypeError) as exc:
                raise TransportError(f"malformed embedding reply: {exc!r}", status=resp.status_code,
                                     attempts=attempt) from exc
        assert last is not None
        raise last

    def embed_many(self, texts: Sequence[str]) -> list[list[float]]:
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        with ThreadPoolExecutor(max_workers=max(1, self.max_in_flight)) as pool:
            results = list(pool.map(self._post, batches))
        vectors = [l2_normalize(v) for batch in results for v in batch]
        if len(vectors) != len(texts):
            raise TransportError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        if vectors:
            self.dim = len(vectors[0])
        return vectors


_DEFAULT = HashingEmbedder()


def embed_intent(text: IntentText | str, embedder: Embedder | None = None) -> IntentEmbedding:
    intent = text if isinstance(text, IntentText) else IntentText(text)
    return embed_intents([intent], embedder)[0]


def embed_intents(texts: Sequence[IntentText | str], embedder: Embedder | None = None) -> list[IntentEmbedding]:
    intents = [t if isinstance(t, IntentText) else IntentText(t, i) for i, t in enumerate(texts)]
    vectors = (embedder or _DEFAULT).embed_many([t.text for t in intents])
    return [IntentEmbedding(tuple(v), len(v), t.id) for t, v in zip(intents, vectors)]
