"""Acceptance gate: one test per top-level product criterion.

Each test is self-contained, seeded, and checks a stated tolerance. The
suite covers: identity configs, average/Rocchio equivalence, the search
and metric oracles, Borda and text-handling properties, structural call
counts, latency shape, directional PRF effectiveness, and the t-test
reference values.
"""

import math
import time

import numpy as np
import pytest

from prfsearch.embedding_store import build_store, top_k_search
from prfsearch.evaluation import (
    Judgments,
    average_precision,
    evaluate_runs,
    ndcg_at,
    paired_t_test,
    reciprocal_rank,
    recall_at,
)
from prfsearch.lexical import build_index
from prfsearch.pipelines import (
    PipelineConfig,
    TextPrfConfig,
    measure_latency,
    run_dense_retrieval_prf,
    run_dense_retrieve,
    run_rerank_text_prf,
    run_rerank_vector,
    run_rerank_vector_prf,
    sweep_dense_prf,
    write_run,
)
from prfsearch.prf_text import (
    MAX_QUERY_TOKENS,
    FeedbackSet,
    WindowSpec,
    aggregate_borda,
    build_ca_queries,
    build_ct_query,
    build_sw_queries,
    sw_partitions,
)
from prfsearch.prf_vector import (
    DEFAULT_WEIGHT_GRID,
    PrfVectorConfig,
    fuse_average,
    fuse_rocchio,
    select_feedback,
)
from prfsearch.scorer import LocalHashBackend
from prfsearch.synthetic import (
    clustered_corpus,
    random_queries,
    random_store,
)
from prfsearch.types import ranked_list_from_scores

DIM = 256


@pytest.fixture(scope="module")
def bench():
    return clustered_corpus(seed=42)


@pytest.fixture(scope="module")
def backend():
    return LocalHashBackend(embed_dim=DIM, seed=42)


@pytest.fixture(scope="module")
def store(bench, backend):
    vectors = backend.embed([text for _, text in bench.corpus])
    return build_store(
        list(zip((pid for pid, _ in bench.corpus), vectors)), dim=DIM
    )


def test_identity_suite(bench, store, backend, tmp_path):
    # Rocchio(alpha=1, beta=0) retrieval and reranking runs must be
    # byte-identical to their no-PRF baselines on a 10k-passage corpus.
    started = time.perf_counter()
    assert store.count == 10_000
    queries = bench.queries

    base, _ = run_dense_retrieve(
        queries, store, backend, PipelineConfig(flow="dense", first_stage_k=1000)
    )
    prf, _ = run_dense_retrieval_prf(
        queries,
        store,
        backend,
        PipelineConfig(
            flow="dense-prf",
            first_stage_k=1000,
            vector=PrfVectorConfig(method="rocchio", depth_k=3, alpha=1.0, beta=0.0),
        ),
    )
    write_run(base, tmp_path / "dense.run", "tag")
    write_run(prf, tmp_path / "dense-prf.run", "tag")
    assert (
        (tmp_path / "dense.run").read_bytes()
        == (tmp_path / "dense-prf.run").read_bytes()
    )

    index = build_index(bench.corpus)
    rbase, _ = run_rerank_vector(
        queries,
        bench.corpus_map,
        index,
        store,
        backend,
        PipelineConfig(flow="rerank-vector", first_stage_k=1000),
    )
    rprf, _ = run_rerank_vector_prf(
        queries,
        bench.corpus_map,
        index,
        store,
        backend,
        PipelineConfig(
            flow="rerank-vector-prf",
            first_stage_k=1000,
            vector=PrfVectorConfig(method="rocchio", depth_k=3, alpha=1.0, beta=0.0),
        ),
    )
    write_run(rbase, tmp_path / "rerank.run", "tag")
    write_run(rprf, tmp_path / "rerank-prf.run", "tag")
    assert (
        (tmp_path / "rerank.run").read_bytes()
        == (tmp_path / "rerank-prf.run").read_bytes()
    )
    assert time.perf_counter() - started < 30.0


def test_average_rocchio_equivalence():
    # fuse_average == fuse_rocchio(1/(k+1), k/(k+1)) within 1e-6 elementwise
    # for 50 random queries and k in {1,3,5,10}, with identical rankings.
    started = time.perf_counter()
    store = random_store(17, 400, 16)
    rng = np.random.default_rng(18)
    for _ in range(50):
        qvec = rng.standard_normal(16)
        first = top_k_search(store, qvec, 100)
        first.query_id = "q"
        for k in (1, 3, 5, 10):
            feedback = select_feedback(first, store, k)
            avg = fuse_average(qvec, feedback)
            roc = fuse_rocchio(qvec, feedback, 1.0 / (k + 1), k / (k + 1))
            assert float(np.max(np.abs(avg - roc))) < 1e-6
            run_avg = top_k_search(store, avg, 100)
            run_roc = top_k_search(store, roc, 100)
            assert run_avg.passage_ids() == run_roc.passage_ids()
    assert time.perf_counter() - started < 10.0


def test_search_oracle():
    # top_k_search must equal an independent brute-force dot-product sort
    # on 200 random stores. Integer-valued vectors keep every dot product
    # exactly representable, so scores and order are compared exactly.
    started = time.perf_counter()
    rng = np.random.default_rng(123)
    for trial in range(200):
        count = int(rng.integers(1, 501))
        dim = int(rng.integers(1, 17))
        matrix = rng.integers(-8, 9, size=(count, dim)).astype(np.float64)
        if count >= 4 and trial % 3 == 0:
            matrix[count // 2] = matrix[0]  # engineered score tie
        ids = [f"p{i:03d}" for i in range(count)]
        order = rng.permutation(count)
        store = build_store(
            [(ids[i], matrix[i]) for i in order], dim=dim
        )
        query = rng.integers(-8, 9, size=dim).astype(np.float64)
        k = int(rng.integers(1, count + 1))
        run = top_k_search(store, query, k)

        reference = []
        for i in order:
            dot = sum(int(matrix[i, d]) * int(query[d]) for d in range(dim))
            reference.append((ids[i], float(dot)))
        reference.sort(key=lambda t: (-t[1], t[0]))
        assert run.passage_ids() == [pid for pid, _ in reference[:k]]
        assert [e.score for e in run.entries] == [
            score for _, score in reference[:k]
        ]
    assert time.perf_counter() - started < 10.0


def _reference_metrics(ranking, judged, cutoff, depth):
    """Metric definitions written out longhand, sharing no library code."""
    rel = {pid for pid, g in judged.items() if g >= 1}
    rr = 0.0
    for i, pid in enumerate(ranking[:depth]):
        if pid in rel:
            rr = 1.0 / (i + 1)
            break
    ap = 0.0
    if rel:
        hits = 0
        for i, pid in enumerate(ranking[:depth]):
            if pid in rel:
                hits += 1
                ap += hits / (i + 1)
        ap /= len(rel)
    dcg = sum(
        (2 ** judged.get(pid, 0) - 1) / math.log2(i + 2)
        for i, pid in enumerate(ranking[:cutoff])
    )
    idcg = sum(
        (2 ** g - 1) / math.log2(i + 2)
        for i, g in enumerate(sorted(judged.values(), reverse=True)[:cutoff])
    )
    ndcg = dcg / idcg if idcg > 0 else 0.0
    recall = (
        sum(1 for pid in ranking[:depth] if pid in rel) / len(rel) if rel else 0.0
    )
    return rr, ap, ndcg, recall


def test_metric_oracle():
    # 100 random multi-query instances against the longhand reference at
    # 1e-9, plus the worked examples held exactly.
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n_queries = int(rng.integers(1, 6))
        for qi in range(n_queries):
            qid = f"q{qi}"
            n_docs = int(rng.integers(1, 21))
            ids = [f"p{i:02d}" for i in range(n_docs)]
            ranking = list(rng.permutation(ids))
            judged = {pid: int(rng.integers(0, 4)) for pid in ids if rng.random() < 0.8}
            if not judged:
                judged = {ids[0]: int(rng.integers(1, 4))}
            run = ranked_list_from_scores(
                qid, [(pid, float(n_docs - i)) for i, pid in enumerate(ranking)]
            )
            judgments = Judgments()
            for pid, grade in judged.items():
                judgments.add(qid, pid, grade)
            for cutoff in (1, 3, 10):
                ref = _reference_metrics(ranking, judged, cutoff, 1000)
                assert ndcg_at(run, judgments, cutoff) == pytest.approx(
                    ref[2], abs=1e-9
                )
            ref_rr, ref_ap, _, ref_recall = _reference_metrics(
                ranking, judged, 10, 1000
            )
            assert reciprocal_rank(run, judgments) == pytest.approx(
                ref_rr, abs=1e-9
            )
            assert average_precision(run, judgments) == pytest.approx(
                ref_ap, abs=1e-9
            )
            assert recall_at(run, judgments, 1000) == pytest.approx(
                ref_recall, abs=1e-9
            )

    # worked MAP example: relevant at ranks 1 and 3 with |R| = 2 -> 5/6
    run = ranked_list_from_scores("q1", [("a", 3.0), ("b", 2.0), ("c", 1.0)])
    judgments = Judgments()
    judgments.add("q1", "a", 1)
    judgments.add("q1", "c", 1)
    assert average_precision(run, judgments) == (1 / 1 + 2 / 3) / 2

    # worked nDCG example: grades (0, 3, 1) at ranks 1..3, judged pool
    # {3, 1, 0}: DCG = 0 + 7/log2(3) + 1/2, IDCG = 7 + 1/log2(3); the
    # quotient of those expressions is the binding value
    run = ranked_list_from_scores("q1", [("a", 3.0), ("b", 2.0), ("c", 1.0)])
    judgments = Judgments()
    judgments.add("q1", "a", 0)
    judgments.add("q1", "b", 3)
    judgments.add("q1", "c", 1)
    expected = (0.0 + 7.0 / math.log2(3) + 1.0 / 2.0) / (7.0 + 1.0 / math.log2(3))
    assert ndcg_at(run, judgments, 3) == pytest.approx(expected, abs=1e-12)
    assert time.perf_counter() - started < 5.0


def test_borda_properties():
    started = time.perf_counter()

    def make_run(ids):
        return ranked_list_from_scores(
            "q", [(pid, float(len(ids) - i)) for i, pid in enumerate(ids)]
        )

    # hand example: one list of 5, candidate at rank 2 -> (5-2+1)/5 = 0.8
    run = make_run(["a", "b", "c", "d", "e"])
    scores = {e.passage_id: e.score for e in aggregate_borda([run]).entries}
    assert scores["b"] == 0.8

    # hand example: two lists of 4, ranks 1 and 3 -> 4/4 + 2/4 = 1.5
    r1 = make_run(["w", "x", "y", "z"])
    r2 = make_run(["x", "y", "w", "z"])
    scores = {e.passage_id: e.score for e in aggregate_borda([r1, r2]).entries}
    assert scores["w"] == 1.5

    # bounds: every aggregated score lies in (0, j] for j input lists
    rng = np.random.default_rng(7)
    pool = [f"p{i}" for i in range(12)]
    for _ in range(50):
        j = int(rng.integers(1, 7))
        lists = []
        for _ in range(j):
            size = int(rng.integers(1, len(pool) + 1))
            ids = list(rng.permutation(pool))[:size]
            lists.append(make_run(ids))
        for entry in aggregate_borda(lists).entries:
            assert 0.0 < entry.score <= j

    # monotonicity: moving a candidate up one list strictly raises its score
    others = ["b", "c", "d", "e"]
    fixed = make_run(["b", "a", "c", "d", "e"])
    previous = -1.0
    for rank in (5, 4, 3, 2, 1):
        order = others.copy()
        order.insert(rank - 1, "a")
        moved = make_run(order)
        score = {
            e.passage_id: e.score for e in aggregate_borda([fixed, moved]).entries
        }["a"]
        assert score > previous
        previous = score
    assert time.perf_counter() - started < 5.0


def test_text_handling_properties():
    started = time.perf_counter()
    rng = np.random.default_rng(11)

    # every emitted PRF query stays within the 256-token cap
    vocabulary = [f"w{i}" for i in range(200)]
    for _ in range(30):
        original = [
            vocabulary[int(rng.integers(len(vocabulary)))]
            for _ in range(int(rng.integers(1, 30)))
        ]
        passages = tuple(
            (
                f"f{i}",
                " ".join(
                    vocabulary[int(rng.integers(len(vocabulary)))]
                    for _ in range(int(rng.integers(1, 120)))
                ),
            )
            for i in range(int(rng.integers(1, 6)))
        )
        feedback = FeedbackSet("q", passages)
        emitted = [build_ct_query(original, feedback)]
        emitted += build_ca_queries(original, feedback)
        emitted += build_sw_queries(original, feedback, WindowSpec(65, 32))
        for query in emitted:
            assert len(query.tokens) <= MAX_QUERY_TOKENS

    # sliding window (window 4, stride 2) over 10 tokens -> exactly 4
    # partitions covering every token
    tokens = [f"t{i}" for i in range(10)]
    parts = sw_partitions(tokens, WindowSpec(4, 2))
    assert len(parts) == 4
    covered = set()
    for part in parts:
        covered.update(part)
    assert covered == set(tokens)

    # CA with a single feedback passage equals CT with that passage
    feedback = FeedbackSet("q", (("f0", "one single feedback passage"),))
    ct = build_ct_query(["orig", "query"], feedback)
    ca = build_ca_queries(["orig", "query"], feedback)
    assert len(ca) == 1
    assert ca[0].tokens == ct.tokens
    assert ca[0].variant_index == ct.variant_index
    assert time.perf_counter() - started < 5.0


def test_structural_call_counts():
    # CA with depth 5 scores passages exactly 6 times (1 initial rerank +
    # 5 variants); dense PRF runs exactly 2 searches and 1 query embedding.
    corpus = [(f"p{i:02d}", f"shared filler{i} extra{i}") for i in range(8)]
    index = build_index(corpus)
    backend = LocalHashBackend(embed_dim=64, seed=42)
    config = PipelineConfig(
        flow="rerank-text-prf",
        first_stage_k=100,
        text=TextPrfConfig(handling="ca", depth_k=5, aggregate="avg"),
    )
    run_rerank_text_prf([("q1", "shared")], dict(corpus), index, backend, config)
    assert backend.score_calls == 6

    store = random_store(3, 300, 64)
    counter = LocalHashBackend(embed_dim=64, seed=42)
    run_dense_retrieval_prf(
        [("q1", "some query words")],
        store,
        counter,
        PipelineConfig(
            flow="dense-prf",
            first_stage_k=50,
            vector=PrfVectorConfig(method="average", depth_k=3),
        ),
    )
    assert store.search_calls == 2
    assert counter.embed_calls == 1


def test_latency_shape():
    # On a 100k-vector store, mean PRF latency must land between 1.5x and
    # 2.5x the no-PRF dense latency over >= 100 queries, warm-up excluded.
    started = time.perf_counter()
    store = random_store(42, 100_000, 64)
    queries = random_queries(43, 100)
    backend = LocalHashBackend(embed_dim=64, seed=42)

    base = measure_latency(
        lambda qs: run_dense_retrieve(
            qs, store, backend, PipelineConfig(flow="dense", first_stage_k=1000)
        ),
        queries,
        repetitions=3,
        flow="dense",
    )
    prf = measure_latency(
        lambda qs: run_dense_retrieval_prf(
            qs,
            store,
            backend,
            PipelineConfig(
                flow="dense-prf",
                first_stage_k=1000,
                vector=PrfVectorConfig(
                    method="rocchio", depth_k=3, alpha=0.5, beta=0.5
                ),
            ),
        ),
        queries,
        repetitions=3,
        flow="dense-prf",
    )
    assert base.query_count == 100
    ratio = prf.mean_ms / base.mean_ms
    assert 1.5 <= ratio <= 2.5, f"latency ratio {ratio:.2f} outside [1.5, 2.5]"
    assert time.perf_counter() - started < 300.0


def test_directional_effectiveness(bench, store, backend):
    # On the clustered synthetic benchmark, the best Rocchio grid point
    # must beat the dense baseline on Recall@100 with paired-t p < 0.05.
    started = time.perf_counter()
    base_runs, _ = run_dense_retrieve(
        bench.queries, store, backend, PipelineConfig(flow="dense", first_stage_k=100)
    )
    base_report = evaluate_runs(base_runs, bench.judgments, ["recall@100"])

    rows = sweep_dense_prf(
        bench.queries,
        store,
        backend,
        bench.judgments,
        metric="recall@100",
        k_grid=[1, 3, 5, 10],
        alpha_grid=list(DEFAULT_WEIGHT_GRID),
        beta_grid=list(DEFAULT_WEIGHT_GRID),
        method="rocchio",
        config=PipelineConfig(flow="dense-prf", first_stage_k=100),
    )
    assert len(rows) == 4 * 10 * 10
    best = rows[0]

    best_runs, _ = run_dense_retrieval_prf(
        bench.queries,
        store,
        backend,
        PipelineConfig(
            flow="dense-prf",
            first_stage_k=100,
            vector=PrfVectorConfig(
                method="rocchio", depth_k=best.k, alpha=best.alpha, beta=best.beta
            ),
        ),
    )
    best_report = evaluate_runs(best_runs, bench.judgments, ["recall@100"])
    assert best_report.mean("recall@100") > base_report.mean("recall@100")

    qids = sorted(best_report.per_query)
    assert len(qids) == 50
    prf_values = [best_report.per_query[q]["recall@100"] for q in qids]
    base_values = [base_report.per_query[q]["recall@100"] for q in qids]
    t_stat, p_value = paired_t_test(prf_values, base_values)
    assert t_stat > 0
    assert p_value < 0.05
    assert time.perf_counter() - started < 600.0


def test_t_test_oracle():
    # n=5 worked example: diffs [1..5] -> t = 3/sqrt(0.5) = 4.2426...,
    # two-sided p = 0.0132..., both within 1e-3 of the reference values
    started = time.perf_counter()
    a = [2.0, 4.0, 6.0, 8.0, 10.0]
    b = [1.0, 2.0, 3.0, 4.0, 5.0]
    t_stat, p_value = paired_t_test(a, b)
    assert t_stat == pytest.approx(4.2426, abs=1e-3)
    assert p_value == pytest.approx(0.0132, abs=1e-3)

    # cross-check against an independent statistical implementation
    scipy_stats = pytest.importorskip("scipy.stats")
    ref = scipy_stats.ttest_rel(a, b)
    assert t_stat == pytest.approx(float(ref.statistic), abs=1e-9)
    assert p_value == pytest.approx(float(ref.pvalue), abs=1e-9)
    assert time.perf_counter() - started < 1.0
