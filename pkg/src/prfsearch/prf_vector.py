"""Vector-based PRF: fuse the query embedding with feedback embeddings.

Two fusion rules, both plain linear combinations (no re-normalization):

* average — elementwise mean of the k+1 vectors (query weighted like each
  feedback passage);
* rocchio — alpha * query + beta * mean(feedback), the positive-feedback
  form (no negative term).

Fusion always accumulates in float64 regardless of storage precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from prfsearch.embedding_store import EmbeddingStore, fetch_vectors
from prfsearch.errors import DimensionMismatch, EmptyFeedback
from prfsearch.types import RankedList

DEFAULT_K_GRID = (1, 3, 5, 10)
DEFAULT_WEIGHT_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))


@dataclass(frozen=True)
class PrfVectorConfig:
    method: str = "rocchio"  # "average" | "rocchio"
    depth_k: int = 3
    alpha: float = 1.0  # rocchio only
    beta: float = 0.5  # rocchio only

    def __post_init__(self) -> None:
        if self.method not in ("average", "rocchio"):
            raise ValueError(f"unknown fusion method {self.method!r}")
        if self.depth_k < 1:
            raise ValueError(f"depth_k must be >= 1, got {self.depth_k}")


def _stack(query_vec: np.ndarray, feedback_vecs: Sequence[np.ndarray]) -> np.ndarray:
    if len(feedback_vecs) == 0:
        raise EmptyFeedback("no feedback vectors to fuse")
    q = np.asarray(query_vec, dtype=np.float64).reshape(-1)
    rows = [q]
    for i, vec in enumerate(feedback_vecs):
        arr = np.asarray(vec, dtype=np.float64).reshape(-1)
        if arr.shape[0] != q.shape[0]:
            raise DimensionMismatch(
                f"feedback vector {i} has dim {arr.shape[0]}, query has {q.shape[0]}"
            )
        rows.append(arr)
    return np.stack(rows)


def fuse_average(
    query_vec: np.ndarray, feedback_vecs: Sequence[np.ndarray]
) -> np.ndarray:
    """Elementwise mean of query and feedback vectors (k+1 rows)."""
    return _stack(query_vec, feedback_vecs).mean(axis=0)


def fuse_rocchio(
    query_vec: np.ndarray,
    feedback_vecs: Sequence[np.ndarray],
    alpha: float,
    beta: float,
) -> np.ndarray:
    """alpha * query + beta * mean(feedback); positive feedback only."""
    stacked = _stack(query_vec, feedback_vecs)
    return alpha * stacked[0] + beta * stacked[1:].mean(axis=0)


def fuse(
    query_vec: np.ndarray,
    feedback_vecs: Sequence[np.ndarray],
    config: PrfVectorConfig,
) -> np.ndarray:
    if config.method == "average":
        return fuse_average(query_vec, feedback_vecs)
    return fuse_rocchio(query_vec, feedback_vecs, config.alpha, config.beta)


def select_feedback(
    run: RankedList, store: EmbeddingStore, k: int
) -> list[np.ndarray]:
    """Vectors of the top-min(k, n) run entries, in rank order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if run.n == 0:
        raise EmptyFeedback(f"run for query {run.query_id!r} is empty")
    ids = [entry.passage_id for entry in run.entries[: min(k, run.n)]]
    return fetch_vectors(store, ids)
