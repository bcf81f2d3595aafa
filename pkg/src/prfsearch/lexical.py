"""BM25 first-stage retrieval over an in-memory inverted index.

Robertson BM25 with +0.5 IDF smoothing and ln(1+.) flooring:

    score(d, q) = sum over query occurrences t of
        IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
    IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5))

Each query occurrence contributes one full term score (the query term
frequency acts as a plain multiplier). Defaults k1=0.9, b=0.4.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from prfsearch.errors import DuplicateId, ParseError, UnknownId
from prfsearch.types import RankedList, ranked_list_from_scores

# lowercase alphanumeric runs; underscore is a separator, not a letter
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters; no empty tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    @property
    def term_count(self) -> int:
        return len(self.postings)


def build_index(corpus: Sequence[tuple[str, str]]) -> InvertedIndex:
    """Index (passage_id, text) pairs; postings id-sorted within each term."""
    index = InvertedIndex()
    for pid, text in corpus:
        if pid in index.doc_lengths:
            raise DuplicateId(f"duplicate passage id {pid!r}")
        tokens = tokenize(text)
        index.doc_lengths[pid] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            index.postings.setdefault(term, []).append((pid, tf))
    for plist in index.postings.values():
        plist.sort(key=lambda entry: entry[0])
    return index


def bm25_search(
    index: InvertedIndex,
    query_text: str,
    k: int,
    params: Bm25Params | None = None,
) -> RankedList:
    """Top-min(k, matching docs) by BM25; out-of-vocabulary query -> empty list."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    params = params or Bm25Params()
    n_docs = index.doc_count
    if n_docs == 0:
        return RankedList(query_id="")
    avgdl = index.avg_doc_length
    scores: dict[str, float] = {}
    for term in tokenize(query_text):
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for pid, tf in plist:
            norm = tf + params.k1 * (
                1.0 - params.b + params.b * index.doc_lengths[pid] / avgdl
            )
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (params.k1 + 1.0) / norm
    return ranked_list_from_scores("", scores.items(), k=k)


def fetch_text(corpus_store: Mapping[str, str], ids: Iterable[str]) -> list[str]:
    """Texts in request order; UnknownId on the first missing id."""
    texts = []
    for pid in ids:
        try:
            texts.append(corpus_store[pid])
        except KeyError:
            raise UnknownId(f"unknown passage id {pid!r}") from None
    return texts


def load_corpus(path) -> list[tuple[str, str]]:
    """Parse a `<id>\\t<text>` line-delimited file (queries use the same shape)."""
    records: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(
                    f"expected `<id>\\t<text>` with exactly one tab, got "
                    f"{len(parts) - 1} tabs",
                    line=lineno,
                )
            pid, text = parts
            if not pid:
                raise ParseError("empty id", line=lineno)
            if pid in seen:
                raise ParseError(f"duplicate id {pid!r}", line=lineno)
            seen.add(pid)
            records.append((pid, text))
    return records


load_queries = load_corpus


def save_index(index: InvertedIndex, path) -> None:
    payload = {
        "format": "prfsearch-lexical-index",
        "version": 1,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[pid, tf] for pid, tf in pl] for t, pl in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))


def load_index(path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}", line=exc.lineno) from None
    if not isinstance(payload, dict) or payload.get("format") != "prfsearch-lexical-index":
        raise ParseError("not a lexical index file")
    index = InvertedIndex()
    index.doc_lengths = {str(k): int(v) for k, v in payload["doc_lengths"].items()}
    index.postings = {
        str(term): [(str(pid), int(tf)) for pid, tf in plist]
        for term, plist in payload["postings"].items()
    }
    return index
