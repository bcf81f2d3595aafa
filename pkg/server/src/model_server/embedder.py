"""Deterministic token-hash embedder (pure stdlib, no model weights).

Construction: each whitespace token is hashed with seeded FNV-1a over its
UTF-8 bytes, finalized with the splitmix64 avalanche. The hash picks a
bucket (low bits mod dim) and a sign (top bit); the signed bucket counts
are scaled by 1/sqrt(token_count). The empty text embeds to the zero
vector. Everything is integer hashing followed by one IEEE-754 division
per component, so vectors are identical across processes and platforms,
and restarts reproduce them exactly.

Scores are inner products of the two embeddings (exactly-rounded
summation via math.fsum).
"""

from __future__ import annotations

import math
import threading
from typing import Sequence

from model_server.profiles import ModelProfile

_MASK64 = (1 << 64) - 1


def _avalanche(x: int) -> int:
    """splitmix64 finalizer."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def token_hash(token: str, seed: int) -> int:
    """Seeded FNV-1a over UTF-8 bytes, finalized with the avalanche mix."""
    h = 0xCBF29CE484222325 ^ _avalanche(seed)
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return _avalanche(h)


def _truncate(text: str, max_tokens: int) -> str:
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


class DeterministicModel:
    """Seeded embedding/scoring model behind the server's inference seam.

    Inference access is serialized with a lock (the contract for any model
    placed behind this seam); the deterministic math itself is pure and
    keeps no per-request state.
    """

    def __init__(self, profile: ModelProfile, seed: int = 42):
        self.profile = profile
        self.seed = seed
        self.name = profile.name
        self.dim = profile.embed_dim
        self._lock = threading.Lock()

    def _embed_text(self, text: str) -> list[float]:
        tokens = text.split()
        if not tokens:
            return [0.0] * self.dim
        counts = [0] * self.dim
        for token in tokens:
            h = token_hash(token, self.seed)
            sign = 1 if (h >> 63) == 0 else -1
            counts[h % self.dim] += sign
        scale = math.sqrt(len(tokens))
        return [c / scale for c in counts]

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        """One vector per text, order preserved; passage cap applied first."""
        cap = self.profile.passage_max_tokens
        with self._lock:
            return [self._embed_text(_truncate(t, cap)) for t in texts]

    def score_batch(self, query: str, passages: Sequence[str]) -> list[float]:
        """Inner product of query and passage embeddings, order preserved."""
        with self._lock:
            qvec = self._embed_text(_truncate(query, self.profile.query_max_tokens))
            cap = self.profile.passage_max_tokens
            scores = []
            for passage in passages:
                pvec = self._embed_text(_truncate(passage, cap))
                scores.append(math.fsum(q * p for q, p in zip(qvec, pvec)))
            return scores
