"""Text-based PRF: query construction and per-candidate score aggregation.

Query construction treats everything at the whitespace-token level and caps
every emitted query at 256 tokens:

* CT (concatenate-truncate): original query followed by all k feedback
  passages, one truncated query.
* CA (concatenate-aggregate): one variant per feedback passage, each the
  original query followed by that passage.
* SW (sliding window): all feedback text is concatenated and re-split into
  overlapping windows; each window becomes a CA-style variant.

Aggregation combines the ranked lists produced by scoring each variant
(the original query's own run is never included):

* Average — mean of a candidate's scores over the lists containing it.
* Max    — maximum of those scores.
* Borda  — sum over lists of (n_i - rank + 1) / n_i; absent lists add 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from prfsearch.errors import EmptyFeedback, EmptyInput, EmptyQuery
from prfsearch.types import RankedList, ranked_list_from_scores

MAX_QUERY_TOKENS = 256


def ws_tokens(text: str) -> list[str]:
    """Whitespace tokens; case and punctuation preserved for the scorer."""
    return text.split()


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window size and stride, in tokens (defaults for MS MARCO-length
    passages; 69/34 and 75/37 suit longer-passage corpora)."""

    window_size: int = 65
    stride: int = 32

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.stride > self.window_size:
            raise ValueError(
                f"stride {self.stride} must not exceed window_size {self.window_size}"
            )


@dataclass(frozen=True)
class FeedbackSet:
    """Top-k feedback passages for one query, rank 1 first."""

    query_id: str
    passages: tuple[tuple[str, str], ...]  # (passage_id, text)

    def __post_init__(self) -> None:
        if not self.passages:
            raise EmptyFeedback(f"no feedback passages for query {self.query_id!r}")

    @property
    def k(self) -> int:
        return len(self.passages)


@dataclass(frozen=True)
class PrfTextQuery:
    query_id: str
    variant_index: int
    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) > MAX_QUERY_TOKENS:
            raise ValueError(
                f"{len(self.tokens)} tokens exceeds the {MAX_QUERY_TOKENS} cap"
            )

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def _capped(tokens: list[str]) -> tuple[str, ...]:
    return tuple(tokens[:MAX_QUERY_TOKENS])


def build_ct_query(original: Sequence[str], feedback: FeedbackSet) -> PrfTextQuery:
    """Single query: original ++ p_1 ++ ... ++ p_k, truncated to 256 tokens."""
    if not original:
        raise EmptyQuery(f"query {feedback.query_id!r} has no tokens")
    tokens = list(original)
    for _, text in feedback.passages:
        tokens.extend(ws_tokens(text))
    return PrfTextQuery(feedback.query_id, 0, _capped(tokens))


def build_ca_queries(
    original: Sequence[str], feedback: FeedbackSet
) -> list[PrfTextQuery]:
    """k variants: variant i is original ++ p_i, each truncated to 256 tokens."""
    if not original:
        raise EmptyQuery(f"query {feedback.query_id!r} has no tokens")
    variants = []
    for i, (_, text) in enumerate(feedback.passages):
        tokens = list(original) + ws_tokens(text)
        variants.append(PrfTextQuery(feedback.query_id, i, _capped(tokens)))
    return variants


def sw_partitions(tokens: Sequence[str], spec: WindowSpec) -> list[list[str]]:
    """Overlapping partitions at offsets 0, stride, 2*stride, ...

    Each partition takes min(window_size, remaining) tokens; the first
    partition whose end reaches len(tokens) is the last (shortened, never
    padded), so every token is covered.
    """
    parts: list[list[str]] = []
    offset = 0
    while True:
        parts.append(list(tokens[offset : offset + spec.window_size]))
        if offset + spec.window_size >= len(tokens):
            break
        offset += spec.stride
    return parts


def build_sw_queries(
    original: Sequence[str], feedback: FeedbackSet, spec: WindowSpec | None = None
) -> list[PrfTextQuery]:
    """One CA-style variant per sliding-window partition of the feedback text."""
    if not original:
        raise EmptyQuery(f"query {feedback.query_id!r} has no tokens")
    spec = spec or WindowSpec()
    combined: list[str] = []
    for _, text in feedback.passages:
        combined.extend(ws_tokens(text))
    if not combined:
        raise EmptyFeedback(
            f"feedback for query {feedback.query_id!r} has no tokens"
        )
    variants = []
    for j, part in enumerate(sw_partitions(combined, spec)):
        tokens = list(original) + part
        variants.append(PrfTextQuery(feedback.query_id, j, _capped(tokens)))
    return variants


def _collect(
    lists: Sequence[RankedList],
) -> tuple[str, dict[str, list[tuple[float, int, int]]]]:
    """Gather (score, rank, list_size) per candidate across the input lists."""
    if not lists:
        raise EmptyInput("no ranked lists to aggregate")
    query_id = lists[0].query_id
    for rl in lists[1:]:
        if rl.query_id != query_id:
            raise ValueError(
                f"cannot aggregate lists for different queries "
                f"({query_id!r} vs {rl.query_id!r})"
            )
    seen: dict[str, list[tuple[float, int, int]]] = {}
    for rl in lists:
        for entry in rl.entries:
            seen.setdefault(entry.passage_id, []).append(
                (entry.score, entry.rank, rl.n)
            )
    return query_id, seen


def aggregate_average(lists: Sequence[RankedList]) -> RankedList:
    """Mean score over the lists that contain each candidate."""
    query_id, seen = _collect(lists)
    scores = {
        pid: sum(s for s, _, _ in hits) / len(hits) for pid, hits in seen.items()
    }
    return ranked_list_from_scores(query_id, scores.items())


def aggregate_max(lists: Sequence[RankedList]) -> RankedList:
    """Maximum score over the lists that contain each candidate."""
    query_id, seen = _collect(lists)
    scores = {pid: max(s for s, _, _ in hits) for pid, hits in seen.items()}
    return ranked_list_from_scores(query_id, scores.items())


def aggregate_borda(lists: Sequence[RankedList]) -> RankedList:
    """Borda count: each list awards (n - rank + 1) / n; absent lists award 0."""
    query_id, seen = _collect(lists)
    scores = {
        pid: sum((n - rank + 1) / n for _, rank, n in hits)
        for pid, hits in seen.items()
    }
    return ranked_list_from_scores(query_id, scores.items())


AGGREGATORS: dict[str, Callable[[Sequence[RankedList]], RankedList]] = {
    "avg": aggregate_average,
    "max": aggregate_max,
    "borda": aggregate_borda,
}
