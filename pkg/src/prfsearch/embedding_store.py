"""Fixed-dimension embedding store with exact top-k inner-product search.

Vectors are held as float32 (and stored as float32 on disk); search widens
to float64 for score accumulation. Retrieval is exact brute force: every
ranking is the full dot-product sort, ties broken by ascending passage id.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from prfsearch.errors import DimensionMismatch, DuplicateId, FormatError, UnknownId
from prfsearch.types import RankedList, ScoredPassage

MAGIC = b"PRFV"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count
_ID_LEN = struct.Struct("<H")


class EmbeddingStore:
    """Immutable id -> vector table; safe for concurrent readers."""

    def __init__(self, ids: Sequence[str], matrix: np.ndarray):
        if matrix.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got shape {matrix.shape}")
        if len(ids) != matrix.shape[0]:
            raise DimensionMismatch(
                f"{len(ids)} ids for {matrix.shape[0]} matrix rows"
            )
        self.ids: tuple[str, ...] = tuple(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.matrix.flags.writeable = False
        self._index: dict[str, int] = {}
        for row, pid in enumerate(self.ids):
            if pid in self._index:
                raise DuplicateId(f"duplicate passage id {pid!r}")
            self._index[pid] = row
        # float64 copy for accumulation; integer id ranks so tie-breaking
        # never needs a string sort on the hot path
        self._matrix64 = self.matrix.astype(np.float64)
        self._matrix64.flags.writeable = False
        order = sorted(range(len(self.ids)), key=lambda r: self.ids[r])
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        for rank, row in enumerate(order):
            self._id_rank[row] = rank
        self.search_calls = 0  # instrumentation; not part of equality

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def count(self) -> int:
        return self.matrix.shape[0]

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._index

    def row(self, passage_id: str) -> int:
        try:
            return self._index[passage_id]
        except KeyError:
            raise UnknownId(f"unknown passage id {passage_id!r}") from None


def build_store(
    passages: Sequence[tuple[str, np.ndarray]], dim: int | None = None
) -> EmbeddingStore:
    """Assemble a store from (passage_id, vector) pairs, preserving order.

    `dim` is only needed for an empty input; otherwise it must match the
    vectors' shared dimensionality.
    """
    if not passages:
        if dim is None or dim <= 0:
            raise DimensionMismatch("an empty store needs an explicit positive dim")
        return EmbeddingStore([], np.zeros((0, dim), dtype=np.float32))
    ids = []
    rows = []
    for pid, vec in passages:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1:
            raise DimensionMismatch(f"vector for {pid!r} is not 1-D")
        if dim is None:
            dim = arr.shape[0]
        if arr.shape[0] != dim:
            raise DimensionMismatch(
                f"vector for {pid!r} has dim {arr.shape[0]}, expected {dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"vector for {pid!r} contains NaN/Inf")
        ids.append(pid)
        rows.append(arr.astype(np.float32))
    return EmbeddingStore(ids, np.stack(rows))


def save_store(store: EmbeddingStore, path) -> None:
    """Write the little-endian binary format (see format constants above)."""
    for pid in store.ids:
        if len(pid.encode("utf-8")) > 0xFFFF:
            raise FormatError(f"passage id too long to encode: {pid[:32]!r}...")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.dim, store.count))
        fh.write(np.ascontiguousarray(store.matrix, dtype="<f4").tobytes())
        for pid in store.ids:
            raw = pid.encode("utf-8")
            fh.write(_ID_LEN.pack(len(raw)))
            fh.write(raw)


def load_store(path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(
            f"header truncated: expected {_HEADER.size} bytes, got {len(blob)}"
        )
    magic, version, dim, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    if dim <= 0:
        raise FormatError(f"non-positive dim {dim}")
    offset = _HEADER.size
    vec_bytes = count * dim * 4
    if len(blob) < offset + vec_bytes:
        raise FormatError(
            f"vector payload truncated: expected {offset + vec_bytes} bytes, "
            f"got {len(blob)}"
        )
    matrix = (
        np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
        .reshape(count, dim)
        .copy()
    )
    offset += vec_bytes
    ids = []
    for i in range(count):
        if len(blob) < offset + _ID_LEN.size:
            raise FormatError(f"id record {i} truncated at byte {offset}")
        (id_len,) = _ID_LEN.unpack_from(blob, offset)
        offset += _ID_LEN.size
        if len(blob) < offset + id_len:
            raise FormatError(
                f"id record {i} truncated: expected {offset + id_len} bytes, "
                f"got {len(blob)}"
            )
        try:
            ids.append(blob[offset : offset + id_len].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"id record {i} is not valid UTF-8: {exc}") from None
        offset += id_len
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after id table")
    return EmbeddingStore(ids, matrix)


def top_k_search(store: EmbeddingStore, query: np.ndarray, k: int) -> RankedList:
    """Exact top-min(k, count) passages by inner product, ties by id ascending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != store.dim:
        raise DimensionMismatch(
            f"query dim {q.shape[0]} != store dim {store.dim}"
        )
    store.search_calls += 1
    scores = store._matrix64 @ q
    # lexsort: last key is primary -> ascending -score, then ascending id
    order = np.lexsort((store._id_rank, -scores))[: min(k, store.count)]
    entries = [
        ScoredPassage(store.ids[row], float(scores[row]), rank)
        for rank, row in enumerate(order, start=1)
    ]
    return RankedList(query_id="", entries=entries)


def fetch_vectors(store: EmbeddingStore, ids: Sequence[str]) -> list[np.ndarray]:
    """Stored vectors (float32, read-only views) in request order."""
    return [store.matrix[store.row(pid)] for pid in ids]
