"""Pseudo-relevance-feedback retrieval engine.

Two-stage retrieval with text-based PRF (concatenate-truncate,
concatenate-aggregate, sliding-window) and vector-based PRF (average,
Rocchio) over a BM25 lexical stage and an exact inner-product embedding
store, plus TREC-style evaluation and latency benchmarking.
"""

from prfsearch.errors import (
    BackendUnavailable,
    DegenerateInput,
    DimensionMismatch,
    DuplicateId,
    EmptyFeedback,
    EmptyInput,
    EmptyQuery,
    FormatError,
    ParseError,
    PrfSearchError,
    ProtocolError,
    UnknownId,
    UnknownQuery,
)
from prfsearch.types import RankedList, ScoredPassage, ranked_list_from_scores

__version__ = "0.1.0"

__all__ = [
    "BackendUnavailable",
    "DegenerateInput",
    "DimensionMismatch",
    "DuplicateId",
    "EmptyFeedback",
    "EmptyInput",
    "EmptyQuery",
    "FormatError",
    "ParseError",
    "PrfSearchError",
    "ProtocolError",
    "RankedList",
    "ScoredPassage",
    "UnknownId",
    "UnknownQuery",
    "ranked_list_from_scores",
    "__version__",
]
