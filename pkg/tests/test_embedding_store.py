import math
import struct

import numpy as np
import pytest

from prfsearch.embedding_store import (
    EmbeddingStore,
    build_store,
    fetch_vectors,
    load_store,
    save_store,
    top_k_search,
)
from prfsearch.errors import (
    DimensionMismatch,
    DuplicateId,
    FormatError,
    UnknownId,
)


def _store(rows, dim=None):
    return build_store(
        [(pid, np.asarray(vec, dtype=np.float32)) for pid, vec in rows], dim=dim
    )


def test_build_store_basic():
    store = _store([("a", [1, 0]), ("b", [0, 1])])
    assert store.count == 2
    assert store.dim == 2
    assert "a" in store and "z" not in store


def test_build_store_rejects_duplicates():
    with pytest.raises(DuplicateId):
        _store([("a", [1, 0]), ("a", [0, 1])])


def test_build_store_rejects_mixed_dims():
    with pytest.raises(DimensionMismatch):
        _store([("a", [1, 0]), ("b", [0, 1, 2])])


def test_build_store_rejects_nonfinite():
    with pytest.raises(ValueError):
        _store([("a", [np.nan, 0.0])])


def test_empty_store_needs_explicit_dim():
    with pytest.raises(DimensionMismatch):
        build_store([])
    store = build_store([], dim=4)
    assert store.count == 0 and store.dim == 4


def test_matrix_is_read_only():
    store = _store([("a", [1, 0])])
    with pytest.raises(ValueError):
        store.matrix[0, 0] = 9.0


def test_row_unknown_id():
    store = _store([("a", [1, 0])])
    with pytest.raises(UnknownId):
        store.row("missing")


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    rows = [(f"p{i:03d}", rng.standard_normal(8)) for i in range(40)]
    store = _store(rows)
    path = tmp_path / "store.prfv"
    save_store(store, path)
    loaded = load_store(path)
    assert loaded.ids == store.ids
    assert loaded.dim == store.dim
    np.testing.assert_array_equal(loaded.matrix, store.matrix)


def test_saved_file_layout(tmp_path):
    store = _store([("ab", [1.5, -2.0])])
    path = tmp_path / "store.prfv"
    save_store(store, path)
    blob = path.read_bytes()
    magic, version, dim, count = struct.unpack_from("<4sIIQ", blob, 0)
    assert magic == b"PRFV"
    assert version == 1
    assert dim == 2
    assert count == 1
    floats = struct.unpack_from("<2f", blob, 20)
    assert floats == (1.5, -2.0)
    (id_len,) = struct.unpack_from("<H", blob, 28)
    assert id_len == 2
    assert blob[30:32] == b"ab"
    assert len(blob) == 32


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.prfv"
    path.write_bytes(b"XXXX" + b"\x00" * 28)
    with pytest.raises(FormatError):
        load_store(path)


def test_load_rejects_bad_version(tmp_path):
    store = _store([("a", [1.0, 2.0])])
    path = tmp_path / "store.prfv"
    save_store(store, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 99
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_store(path)


def test_load_rejects_truncation(tmp_path):
    store = _store([("a", [1.0, 2.0]), ("b", [3.0, 4.0])])
    path = tmp_path / "store.prfv"
    save_store(store, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(FormatError):
        load_store(path)


def test_load_rejects_trailing_bytes(tmp_path):
    store = _store([("a", [1.0, 2.0])])
    path = tmp_path / "store.prfv"
    save_store(store, path)
    path.write_bytes(path.read_bytes() + b"junk")
    with pytest.raises(FormatError):
        load_store(path)


def test_top_k_search_matches_brute_force():
    rng = np.random.default_rng(11)
    rows = [(f"p{i:03d}", rng.standard_normal(6)) for i in range(100)]
    store = _store(rows)
    query = rng.standard_normal(6)
    run = top_k_search(store, query, 10)
    # independent reference: exhaustive fsum dots, sort by (-score, id)
    reference = []
    for pid, vec in rows:
        dot = math.fsum(
            float(np.float32(x)) * float(q) for x, q in zip(vec, query)
        )
        reference.append((pid, dot))
    reference.sort(key=lambda t: (-t[1], t[0]))
    assert run.passage_ids() == [pid for pid, _ in reference[:10]]
    for entry, (_, dot) in zip(run.entries, reference):
        assert entry.score == pytest.approx(dot, abs=1e-9)


def test_top_k_search_tie_break_by_id():
    store = _store([("z9", [1, 0]), ("a1", [1, 0]), ("m5", [1, 0])])
    run = top_k_search(store, np.array([1.0, 0.0]), 3)
    assert run.passage_ids() == ["a1", "m5", "z9"]


def test_top_k_search_k_clamped_to_count():
    store = _store([("a", [1, 0]), ("b", [0, 1])])
    run = top_k_search(store, np.array([1.0, 1.0]), 100)
    assert run.n == 2


def test_top_k_search_dim_mismatch():
    store = _store([("a", [1, 0])])
    with pytest.raises(DimensionMismatch):
        top_k_search(store, np.array([1.0, 0.0, 2.0]), 1)


def test_search_counter_increments():
    store = _store([("a", [1, 0])])
    assert store.search_calls == 0
    top_k_search(store, np.array([1.0, 0.0]), 1)
    top_k_search(store, np.array([0.0, 1.0]), 1)
    assert store.search_calls == 2


def test_fetch_vectors_order_and_unknown():
    store = _store([("a", [1, 0]), ("b", [0, 1])])
    vecs = fetch_vectors(store, ["b", "a"])
    np.testing.assert_array_equal(vecs[0], np.array([0, 1], dtype=np.float32))
    np.testing.assert_array_equal(vecs[1], np.array([1, 0], dtype=np.float32))
    with pytest.raises(UnknownId):
        fetch_vectors(store, ["nope"])


def test_unicode_ids_roundtrip(tmp_path):
    store = _store([("päs-βid", [1.0, 0.0])])
    path = tmp_path / "store.prfv"
    save_store(store, path)
    assert load_store(path).ids == ("päs-βid",)
