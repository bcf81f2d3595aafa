"""Core ranked-output types shared by every stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


@dataclass(frozen=True, slots=True)
class ScoredPassage:
    passage_id: str
    score: float
    rank: int  # 1-based, contiguous within a RankedList


@dataclass(slots=True)
class RankedList:
    """Ordered scored passages for one query.

    Invariants: ranks contiguous from 1, scores non-increasing by rank,
    passage ids unique.
    """

    query_id: str
    entries: list[ScoredPassage] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.entries)

    def passage_ids(self) -> list[str]:
        return [e.passage_id for e in self.entries]

    def validate(self) -> None:
        seen: set[str] = set()
        prev_score = None
        for i, e in enumerate(self.entries, start=1):
            if e.rank != i:
                raise ValueError(f"rank {e.rank} at position {i} is not contiguous")
            if prev_score is not None and e.score > prev_score:
                raise ValueError(f"score increases at rank {i}")
            if e.passage_id in seen:
                raise ValueError(f"duplicate passage id {e.passage_id!r}")
            seen.add(e.passage_id)
            prev_score = e.score


def ranked_list_from_scores(
    query_id: str, scored: Iterable[tuple[str, float]], k: int | None = None
) -> RankedList:
    """Sort (passage_id, score) pairs into a RankedList.

    Descending score, ties broken by ascending passage_id; optionally
    truncated to the top k. This is the single tie rule used everywhere.
    """
    items = sorted(scored, key=lambda t: (-t[1], t[0]))
    if k is not None:
        items = items[:k]
    entries = [
        ScoredPassage(pid, float(score), rank)
        for rank, (pid, score) in enumerate(items, start=1)
    ]
    return RankedList(query_id=query_id, entries=entries)


def reranked(run: RankedList, scores: Sequence[float]) -> RankedList:
    """Re-sort a run's candidate pool under new scores (pool unchanged)."""
    if len(scores) != run.n:
        raise ValueError(f"{len(scores)} scores for {run.n} candidates")
    pairs = zip(run.passage_ids(), (float(s) for s in scores))
    return ranked_list_from_scores(run.query_id, pairs)
