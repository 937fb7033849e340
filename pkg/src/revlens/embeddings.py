"""Sentence-embedding providers and cosine similarity.

Three interchangeable backends sit behind one interface: a precomputed
vector file, a remote HTTP embedding service, and a deterministic
hash-based embedder used wherever tests need reproducible vectors without
a model. All providers cache by content hash and are safe for concurrent
batch calls.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

import httpx


class EmbeddingError(Exception):
    """Base class for provider failures."""


class TransportError(EmbeddingError):
    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class ContractError(EmbeddingError):
    """Provider output violated the configured contract."""


class MissingEmbeddingError(EmbeddingError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no embedding stored for key {key!r}")


@dataclass(frozen=True)
class EmbeddingVector:
    key: str
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    backend: str = "deterministic"  # deterministic | file | http
    location: str = ""
    dim: int = 64
    timeout: float = 10.0
    max_batch: int = 64
    seed: int = 0
    max_retries: int = 3
    backoff: float = 0.25

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


def content_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding overshoot."""
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} vs {b.dim}")
    va, vb = a.as_array(), b.as_array()
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ContractError("cosine undefined for zero vector")
    if a.values == b.values:
        return 1.0
    value = float(np.dot(va, vb) / (na * nb))
    return max(-1.0, min(1.0, value))


class _CachingProvider:
    """Shared cache + contract checks; subclasses implement _compute."""

    def __init__(self, config: EmbeddingProviderConfig):
        self.config = config
        self._cache: dict[str, EmbeddingVector] = {}
        self._lock = threading.Lock()

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not isinstance(texts, (list, tuple)) or not texts:
            raise ValueError("texts must be a non-empty list")
        keys = [content_key(t) for t in texts]
        with self._lock:
            missing = [(i, t) for i, (t, k) in enumerate(zip(texts, keys)) if k not in self._cache]
        if missing:
            fresh = self._compute([t for _, t in missing])
            with self._lock:
                for (_, text), vec in zip(missing, fresh):
                    self._check(vec)
                    self._cache[content_key(text)] = vec
        with self._lock:
            return [self._cache[k] for k in keys]

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def _check(self, vec: EmbeddingVector) -> None:
        if vec.dim != self.config.dim:
            raise ContractError(
                f"provider returned dim {vec.dim}, config requires {self.config.dim}"
            )
        arr = vec.as_array()
        if not np.all(np.isfinite(arr)):
            raise ContractError("provider returned non-finite components")
        if float(np.linalg.norm(arr)) == 0.0:
            raise ContractError("provider returned a zero vector")

    def _compute(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        raise NotImplementedError


class DeterministicProvider(_CachingProvider):
    """Seeded hash of character n-grams folded into a unit vector.

    Output depends only on (text, dim, seed) and is byte-reproducible
    across processes; identical texts map to identical vectors and small
    edits move the vector.
    """

    def _compute(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> EmbeddingVector:
        dim, seed = self.config.dim, self.config.seed
        vec = np.zeros(dim, dtype=np.float64)
        for n in (1, 2, 3):
            for i in range(max(0, len(text) - n + 1)):
                gram = text[i : i + n]
                digest = hashlib.sha256(f"{seed}|{n}|{gram}".encode("utf-8")).digest()
                idx = int.from_bytes(digest[:4], "big") % dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                vec[idx] += sign
        if float(np.linalg.norm(vec)) == 0.0:
            # Empty or fully cancelling input: fall back to a unit basis
            # vector chosen by the whole-text hash so the norm invariant holds.
            digest = hashlib.sha256(f"{seed}|full|{text}".encode("utf-8")).digest()
            vec[int.from_bytes(digest[:4], "big") % dim] = 1.0
        vec /= np.linalg.norm(vec)
        return EmbeddingVector(content_key(text), tuple(float(x) for x in vec))


class FileProvider(_CachingProvider):
    """Lookup of precomputed vectors from a JSONL file of {key, values}.

    Rows may be keyed by the raw text or by its sha256 content hash.
    """

    def __init__(self, config: EmbeddingProviderConfig):
        super().__init__(config)
        self._table: dict[str, tuple[float, ...]] = {}
        path = Path(config.location)
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self._table[str(rec["key"])] = tuple(float(x) for x in rec["values"])

    def _compute(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            values = self._table.get(text)
            if values is None:
                values = self._table.get(content_key(text))
            if values is None:
                raise MissingEmbeddingError(text)
            out.append(EmbeddingVector(content_key(text), values))
        return out


class HttpProvider(_CachingProvider):
    """Remote embedding service: POST {texts: [...]} -> {vectors: [[...]]}.

    Retries transport failures and non-200 responses with exponential
    backoff; batches are capped at config.max_batch.
    """

    def __init__(self, config: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(config)
        self._client = httpx.Client(
            timeout=config.timeout, transport=transport, base_url=""
        )

    def _compute(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors: list[EmbeddingVector] = []
        for start in range(0, len(texts), self.config.max_batch):
            chunk = list(texts[start : start + self.config.max_batch])
            rows = self._post_with_retries(chunk)
            if len(rows) != len(chunk):
                raise ContractError(
                    f"service returned {len(rows)} vectors for {len(chunk)} texts"
                )
            for text, row in zip(chunk, rows):
                vectors.append(
                    EmbeddingVector(content_key(text), tuple(float(x) for x in row))
                )
        return vectors

    def _post_with_retries(self, chunk: list[str]) -> list[list[float]]:
        last_error = "unknown"
        for attempt in range(1, self.config.max_retries + 1):
            try:
                resp = self._client.post(self.config.location, json={"texts": chunk})
                if resp.status_code != 200:
                    last_error = f"HTTP {resp.status_code}"
                else:
                    return resp.json()["vectors"]
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            if attempt < self.config.max_retries:
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
        raise TransportError(
            f"embedding service unreachable ({last_error})", self.config.max_retries
        )


def make_provider(
    config: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None
) -> _CachingProvider:
    if config.backend == "deterministic":
        return DeterministicProvider(config)
    if config.backend == "file":
        return FileProvider(config)
    if config.backend == "http":
        return HttpProvider(config, transport=transport)
    raise ValueError(f"unknown embedding backend {config.backend!r}")
