"""Segment embedding backends.

Two backends share one entry point, :func:`embed_batch`:

* ``stub``: offline bag-of-words embedder. Each word is hashed (with a seed)
  to a pseudo-random unit vector and a segment is the sum of its word vectors,
  so texts sharing more words correlate more strongly.
* ``remote``: any HTTP server speaking ``{"model", "texts"} -> {"vectors"}``.

Both are fronted by an optional on-disk cache keyed by (model id, dim, text).
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import httpx
import numpy as np

from .errors import DimMismatch, ProviderUnavailable

logger = logging.getLogger(__name__)

DEFAULT_DIM = 768
EMBED_TOKEN_ENV = "RECALLSCORE_EMBED_TOKEN"


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "stub"
    endpoint: str | None = None
    model_id: str = "stub-bow"
    dim: int = DEFAULT_DIM
    max_in_flight: int = 4
    retry_limit: int = 3
    cache_dir: str | None = None
    seed: int = 0
    batch_size: int = 32
    timeout: float = 60.0
    token_env: str = EMBED_TOKEN_ENV

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown embedding provider kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedding provider needs an endpoint")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProviderConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    def cache_identity(self) -> str:
        # the stub's output depends on its seed, a remote model's does not
        if self.kind == "stub":
            return f"{self.model_id}#seed={self.seed}"
        return self.model_id


# --------------------------------------------------------------------------
# stub backend


def normalize_word(token: str) -> str:
    """Casefold and trim surrounding punctuation so ``"Ran."`` matches ``"ran"``."""
    word = token.casefold()
    start, end = 0, len(word)
    while start < end and unicodedata.category(word[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(word[end - 1]).startswith("P"):
        end -= 1
    return word[start:end] or word


@lru_cache(maxsize=200_000)
def _word_vector(word: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{word}".encode("utf-8"), digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    vec.setflags(write=False)
    return vec


def stub_embed(text: str, dim: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic bag-of-words embedding: sum of seeded unit word vectors."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    out = np.zeros(dim)
    for token in text.split():
        out += _word_vector(normalize_word(token), dim, seed)
    return out


# --------------------------------------------------------------------------
# cache


class EmbeddingCache:
    """One ``.npy`` file per (model, dim, text) key; writes are atomic."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model: str, dim: int, text: str) -> str:
        h = hashlib.sha256()
        for part in (model, str(dim), text):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.npy"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if not path.exists():
            return None
        return np.load(path, allow_pickle=False)

    def put(self, key: str, vector: np.ndarray) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.save(fh, np.asarray(vector, dtype=np.float64), allow_pickle=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# --------------------------------------------------------------------------
# remote backend


class RemoteEmbeddingClient:
    """POSTs batches of texts to an embedding server with bounded concurrency."""

    def __init__(self, cfg: ProviderConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        headers = {}
        token = os.environ.get(cfg.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._headers = headers
        self.request_count = 0

    def _post(self, texts: list[str]) -> list[list[float]]:
        last_exc: Exception | None = None
        for attempt in range(self.cfg.retry_limit):
            if attempt:
                time.sleep(min(0.1 * 2 ** (attempt - 1), 5.0))
            self.request_count += 1
            try:
                resp = self._client.post(
                    self.cfg.endpoint,
                    json={"model": self.cfg.model_id, "texts": texts},
                    headers=self._headers,
                )
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_exc = exc
                logger.warning("embedding request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if len(vectors) != len(texts):
                raise DimMismatch(f"server returned {len(vectors)} vectors for {len(texts)} texts")
            return vectors
        raise ProviderUnavailable(
            f"embedding endpoint {self.cfg.endpoint} failed {self.cfg.retry_limit} times: {last_exc}"
        )

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        size = self.cfg.batch_size
        batches = [list(texts[i : i + size]) for i in range(0, len(texts), size)]
        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as pool:
            # map() yields in submission order, so output stays index-aligned
            results = list(pool.map(self._post, batches))
        out = []
        for batch in results:
            for raw in batch:
                vec = np.asarray(raw, dtype=np.float64)
                if vec.shape != (self.cfg.dim,):
                    raise DimMismatch(f"expected dim {self.cfg.dim}, got shape {vec.shape}")
                out.append(vec)
        return out


# --------------------------------------------------------------------------
# front end


@dataclass
class Embedder:
    cfg: ProviderConfig
    client: httpx.Client | None = None
    _remote: RemoteEmbeddingClient | None = field(default=None, init=False, repr=False)
    _cache: EmbeddingCache | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.cfg.kind == "remote":
            self._remote = RemoteEmbeddingClient(self.cfg, self.client)
        if self.cfg.cache_dir:
            self._cache = EmbeddingCache(self.cfg.cache_dir)

    def with_seed(self, seed: int) -> "Embedder":
        return Embedder(replace(self.cfg, seed=seed), self.client)

    def _compute(self, texts: list[str]) -> list[np.ndarray]:
        if self._remote is not None:
            return self._remote.embed(texts)
        return [stub_embed(t, self.cfg.dim, self.cfg.seed) for t in texts]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        for i, t in enumerate(texts):
            if not t or not t.strip():
                raise ValueError(f"text {i} is empty")
        results: list[np.ndarray | None] = [None] * len(texts)
        missing: dict[str, list[int]] = {}
        ident = self.cfg.cache_identity()
        for i, t in enumerate(texts):
            if self._cache is not None:
                hit = self._cache.get(EmbeddingCache.key(ident, self.cfg.dim, t))
                if hit is not None:
                    results[i] = hit
                    continue
            missing.setdefault(t, []).append(i)

        if missing:
            unique = list(missing)
            for text, vec in zip(unique, self._compute(unique)):
                if vec.shape != (self.cfg.dim,):
                    raise DimMismatch(f"expected dim {self.cfg.dim}, got shape {vec.shape}")
                if not np.all(np.isfinite(vec)):
                    raise DimMismatch("backend returned non-finite values")
                if self._cache is not None:
                    self._cache.put(EmbeddingCache.key(ident, self.cfg.dim, text), vec)
                for i in missing[text]:
                    results[i] = vec.copy()
        return results  # type: ignore[return-value]


def embed_batch(texts: Sequence[str], cfg: ProviderConfig) -> list[np.ndarray]:
    return Embedder(cfg).embed_batch(texts)
