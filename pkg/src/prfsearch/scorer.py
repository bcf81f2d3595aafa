"""Embedding / pairwise-scoring backends behind one small interface.

Two backends:

* LocalHashBackend — a deterministic, dependency-free embedder. Each
  whitespace token is hashed with a seeded 64-bit mixer into `embed_dim`
  buckets with a +/-1 sign, and the signed counts are scaled by
  1/sqrt(token_count). Shared vocabulary therefore induces correlated
  vectors, which is what makes PRF effects observable on synthetic data,
  and the construction is pure integer hashing so results are identical
  across processes and platforms.

* RemoteBackend — HTTP client for the model-server wire protocol
  (POST /embed, POST /score, GET /health; JSON bodies). Requests are
  chunked (default 32 texts) and reassembled in order; malformed or
  length-mismatched responses raise ProtocolError, connectivity problems
  raise BackendUnavailable. No automatic retries: failures must be loud.

Both backends count their embed/score calls for structural tests.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from prfsearch.errors import BackendUnavailable, ProtocolError

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(x: int) -> int:
    """splitmix64 finalizer: avalanche the 64-bit state."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def token_hash(token: str, seed: int) -> int:
    """Seeded FNV-1a over UTF-8 bytes, finalized with splitmix64."""
    h = (_FNV_OFFSET ^ _mix64(seed)) & _MASK64
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return _mix64(h)


@dataclass(frozen=True)
class TruncationProfile:
    """Whitespace-token caps applied before texts reach a model."""

    name: str
    query_max_tokens: int
    passage_max_tokens: int


PROFILES: dict[str, TruncationProfile] = {
    "repbert": TruncationProfile("repbert", 20, 256),
    "ance": TruncationProfile("ance", 64, 512),
}


def truncate_for_model(text: str, max_tokens: int) -> str:
    """Keep the first max_tokens whitespace tokens; shorter text is unchanged."""
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


class ScorerBackend(Protocol):
    embed_dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...

    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]: ...


class LocalHashBackend:
    """Deterministic seeded token-hash embedder; a pure function of (text, seed)."""

    def __init__(self, embed_dim: int, seed: int = 42):
        if embed_dim < 1:
            raise ValueError(f"embed_dim must be >= 1, got {embed_dim}")
        self.embed_dim = embed_dim
        self.seed = seed
        self.embed_calls = 0
        self.score_calls = 0
        self._lock = threading.Lock()
        self._token_cache: dict[str, tuple[int, int]] = {}

    def _bucket_sign(self, token: str) -> tuple[int, int]:
        cached = self._token_cache.get(token)
        if cached is None:
            h = token_hash(token, self.seed)
            cached = (h % self.embed_dim, 1 if (h >> 63) == 0 else -1)
            self._token_cache[token] = cached
        return cached

    def _embed_one(self, text: str) -> np.ndarray:
        tokens = text.split()
        counts = np.zeros(self.embed_dim, dtype=np.int64)
        for tok in tokens:
            bucket, sign = self._bucket_sign(tok)
            counts[bucket] += sign
        if not tokens:
            return np.zeros(self.embed_dim, dtype=np.float64)
        return counts / np.sqrt(len(tokens))

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        with self._lock:
            self.embed_calls += 1
        return [self._embed_one(t) for t in texts]

    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]:
        with self._lock:
            self.score_calls += 1
        qvec = self._embed_one(query)
        return [float(qvec @ self._embed_one(p)) for p in passages]


def _chunks(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


class RemoteBackend:
    """Client for the model-server wire protocol."""

    def __init__(
        self,
        endpoint: str,
        chunk_size: int = 32,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        if chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
        self.endpoint = endpoint.rstrip("/")
        self.chunk_size = chunk_size
        self.timeout = timeout
        self._session = session or requests.Session()
        self.embed_calls = 0
        self.score_calls = 0
        self._lock = threading.Lock()
        health = self._get("/health")
        if health.get("status") != "ok":
            raise BackendUnavailable(
                f"backend at {self.endpoint} reports status {health.get('status')!r}"
            )
        dim = health.get("dim")
        if not isinstance(dim, int) or dim < 1:
            raise ProtocolError(f"/health returned invalid dim {dim!r}")
        self.embed_dim: int = dim
        self.model: str = str(health.get("model", ""))

    def _get(self, path: str) -> dict:
        try:
            resp = self._session.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"GET {path} failed: {exc}") from None
        return self._payload(resp, path)

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._session.post(
                self.endpoint + path, json=body, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"POST {path} failed: {exc}") from None
        return self._payload(resp, path)

    def _payload(self, resp: requests.Response, path: str) -> dict:
        if resp.status_code == 503:
            raise BackendUnavailable(f"{path} answered 503 (model unavailable)")
        if resp.status_code != 200:
            raise ProtocolError(f"{path} answered HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{path} returned non-JSON body: {exc}") from None
        if not isinstance(payload, dict):
            raise ProtocolError(f"{path} returned {type(payload).__name__}, not an object")
        return payload

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        with self._lock:
            self.embed_calls += 1
        vectors: list[np.ndarray] = []
        for chunk in _chunks(list(texts), self.chunk_size):
            payload = self._post("/embed", {"texts": list(chunk)})
            dim = payload.get("dim")
            rows = payload.get("vectors")
            if dim != self.embed_dim:
                raise ProtocolError(
                    f"/embed returned dim {dim!r}, backend declared {self.embed_dim}"
                )
            if not isinstance(rows, list) or len(rows) != len(chunk):
                got = len(rows) if isinstance(rows, list) else type(rows).__name__
                raise ProtocolError(
                    f"/embed returned {got} vectors for {len(chunk)} texts"
                )
            for row in rows:
                vec = np.asarray(row, dtype=np.float64)
                if vec.ndim != 1 or vec.shape[0] != self.embed_dim:
                    raise ProtocolError(
                        f"/embed vector has shape {vec.shape}, expected ({self.embed_dim},)"
                    )
                vectors.append(vec)
        return vectors

    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]:
        with self._lock:
            self.score_calls += 1
        scores: list[float] = []
        for chunk in _chunks(list(passages), self.chunk_size):
            payload = self._post("/score", {"query": query, "passages": list(chunk)})
            chunk_scores = payload.get("scores")
            if not isinstance(chunk_scores, list) or len(chunk_scores) != len(chunk):
                got = (
                    len(chunk_scores)
                    if isinstance(chunk_scores, list)
                    else type(chunk_scores).__name__
                )
                raise ProtocolError(
                    f"/score returned {got} scores for {len(chunk)} passages"
                )
            for s in chunk_scores:
                if not isinstance(s, (int, float)) or isinstance(s, bool):
                    raise ProtocolError(f"/score returned non-numeric score {s!r}")
                scores.append(float(s))
        return scores

    def health(self) -> dict:
        return self._get("/health")
