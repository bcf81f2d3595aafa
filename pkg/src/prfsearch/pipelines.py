"""End-to-end retrieval flows, parameter sweeps, and latency measurement.

Flows (per query, stages timed with a monotonic clock):

* lexical           BM25 top first_stage_k.
* dense             embed query -> exact inner-product search.
* dense-prf         embed -> search -> top-k feedback vectors -> fuse
                    (average or Rocchio) -> search again; the final list
                    keeps first_stage_k entries.
* rerank            BM25 pool -> scorer rescores (query, passage) pairs.
* rerank-text-prf   rerank, then CT/CA/SW query variants from the top-k
                    reranked texts; each variant rescored over the same
                    pool; variant lists aggregated (avg/max/borda). CT's
                    single list is used directly.
* rerank-vector     BM25 pool -> rescore by dot(query embedding, stored
                    passage vector).
* rerank-vector-prf rerank, then top-k reranked ids -> stored vectors ->
                    fuse -> rescore the unchanged pool by dot product.

Reranking flows always output a permutation of their candidate pool.
Latency stage attribution: first_stage = initial retrieval (+ initial
rerank scoring for rerank flows), prf_build = feedback/variant
construction and fusion, second_stage = the rescoring/search that uses the
PRF output.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from prfsearch.embedding_store import EmbeddingStore, fetch_vectors, top_k_search
from prfsearch.errors import EmptyInput
from prfsearch.evaluation import Judgments, MetricConfig, evaluate_runs
from prfsearch.lexical import Bm25Params, InvertedIndex, bm25_search, fetch_text
from prfsearch.prf_text import (
    AGGREGATORS,
    FeedbackSet,
    PrfTextQuery,
    WindowSpec,
    build_ca_queries,
    build_ct_query,
    build_sw_queries,
    ws_tokens,
)
from prfsearch.prf_vector import PrfVectorConfig, fuse, select_feedback
from prfsearch.scorer import ScorerBackend, TruncationProfile, truncate_for_model
from prfsearch.types import RankedList, reranked

Query = tuple[str, str]  # (query_id, text)

FLOWS = (
    "lexical",
    "dense",
    "dense-prf",
    "rerank",
    "rerank-text-prf",
    "rerank-vector",
    "rerank-vector-prf",
)


@dataclass(frozen=True)
class TextPrfConfig:
    handling: str = "ca"  # "ct" | "ca" | "sw"
    depth_k: int = 3
    aggregate: str = "avg"  # "avg" | "max" | "borda"
    window: WindowSpec = field(default_factory=WindowSpec)

    def __post_init__(self) -> None:
        if self.handling not in ("ct", "ca", "sw"):
            raise ValueError(f"unknown text handling {self.handling!r}")
        if self.aggregate not in AGGREGATORS:
            raise ValueError(f"unknown aggregation {self.aggregate!r}")
        if self.depth_k < 1:
            raise ValueError(f"depth_k must be >= 1, got {self.depth_k}")


@dataclass(frozen=True)
class PipelineConfig:
    flow: str = "dense"
    first_stage_k: int = 1000
    vector: PrfVectorConfig | None = None
    text: TextPrfConfig | None = None
    bm25: Bm25Params = field(default_factory=Bm25Params)
    profile: TruncationProfile | None = None
    run_tag: str = "prfsearch"
    threads: int = 1

    def __post_init__(self) -> None:
        if self.flow not in FLOWS:
            raise ValueError(f"unknown flow {self.flow!r}")
        if self.first_stage_k < 1:
            raise ValueError(f"first_stage_k must be >= 1, got {self.first_stage_k}")
        depth = self.prf_depth
        if depth is not None and self.first_stage_k < depth:
            raise ValueError(
                f"first_stage_k {self.first_stage_k} is smaller than PRF depth {depth}"
            )
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    @property
    def prf_depth(self) -> int | None:
        if self.flow == "dense-prf" or self.flow == "rerank-vector-prf":
            return (self.vector or PrfVectorConfig()).depth_k
        if self.flow == "rerank-text-prf":
            return (self.text or TextPrfConfig()).depth_k
        return None


@dataclass(frozen=True)
class LatencyRecord:
    query_id: str
    first_stage_ms: float
    prf_build_ms: float
    second_stage_ms: float
    total_ms: float


class _Timer:
    def __init__(self) -> None:
        self.start = time.perf_counter()
        self.last = self.start

    def lap(self) -> float:
        now = time.perf_counter()
        elapsed = (now - self.last) * 1000.0
        self.last = now
        return elapsed

    def total(self) -> float:
        return (time.perf_counter() - self.start) * 1000.0


def _truncated_query(text: str, profile: TruncationProfile | None) -> str:
    if profile is None:
        return text
    return truncate_for_model(text, profile.query_max_tokens)


def _truncated_passages(
    texts: Sequence[str], profile: TruncationProfile | None
) -> list[str]:
    if profile is None:
        return list(texts)
    return [truncate_for_model(t, profile.passage_max_tokens) for t in texts]


def _map_queries(
    queries: Sequence[Query],
    fn: Callable[[Query], tuple[str, RankedList, LatencyRecord]],
    threads: int,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, queries))
    else:
        results = [fn(q) for q in queries]
    runs: dict[str, RankedList] = {}
    latencies: list[LatencyRecord] = []
    for qid, run, record in results:
        runs[qid] = run
        latencies.append(record)
    return runs, latencies


# --- retrieval flows --------------------------------------------------------

def run_lexical(
    queries: Sequence[Query], index: InvertedIndex, config: PipelineConfig
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    def one(query: Query):
        qid, text = query
        timer = _Timer()
        run = bm25_search(index, text, config.first_stage_k, config.bm25)
        run.query_id = qid
        first = timer.lap()
        return qid, run, LatencyRecord(qid, first, 0.0, 0.0, timer.total())

    return _map_queries(queries, one, config.threads)


def run_dense_retrieve(
    queries: Sequence[Query],
    store: EmbeddingStore,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    def one(query: Query):
        qid, text = query
        timer = _Timer()
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        run = top_k_search(store, qvec, config.first_stage_k)
        run.query_id = qid
        first = timer.lap()
        return qid, run, LatencyRecord(qid, first, 0.0, 0.0, timer.total())

    return _map_queries(queries, one, config.threads)


def run_dense_retrieval_prf(
    queries: Sequence[Query],
    store: EmbeddingStore,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    prf = config.vector or PrfVectorConfig()

    def one(query: Query):
        qid, text = query
        timer = _Timer()
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        first_run = top_k_search(store, qvec, config.first_stage_k)
        first = timer.lap()
        feedback = select_feedback(first_run, store, prf.depth_k)
        fused = fuse(qvec, feedback, prf)
        build = timer.lap()
        run = top_k_search(store, fused, config.first_stage_k)
        run.query_id = qid
        second = timer.lap()
        return qid, run, LatencyRecord(qid, first, build, second, timer.total())

    return _map_queries(queries, one, config.threads)


# --- reranking flows --------------------------------------------------------

def _bm25_pool_and_texts(
    index: InvertedIndex,
    corpus: Mapping[str, str],
    qid: str,
    text: str,
    config: PipelineConfig,
) -> tuple[RankedList, list[str]]:
    pool = bm25_search(index, text, config.first_stage_k, config.bm25)
    pool.query_id = qid
    texts = fetch_text(corpus, pool.passage_ids())
    return pool, texts


def run_rerank(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    """BM25 pool rescored once by the scorer (the no-PRF rerank baseline)."""

    def one(query: Query):
        qid, text = query
        timer = _Timer()
        pool, texts = _bm25_pool_and_texts(index, corpus, qid, text, config)
        if pool.n:
            scores = scorer.score_pairs(
                _truncated_query(text, config.profile),
                _truncated_passages(texts, config.profile),
            )
            run = reranked(pool, scores)
        else:
            run = pool
        first = timer.lap()
        return qid, run, LatencyRecord(qid, first, 0.0, 0.0, timer.total())

    return _map_queries(queries, one, config.threads)


def _score_variant(
    scorer: ScorerBackend,
    variant: PrfTextQuery,
    pool: RankedList,
    passage_texts: Sequence[str],
    profile: TruncationProfile | None,
) -> RankedList:
    scores = scorer.score_pairs(
        _truncated_query(variant.text, profile),
        _truncated_passages(passage_texts, profile),
    )
    return reranked(pool, scores)


def build_text_variants(
    query_tokens: Sequence[str], feedback: FeedbackSet, text_cfg: TextPrfConfig
) -> list[PrfTextQuery]:
    if text_cfg.handling == "ct":
        return [build_ct_query(query_tokens, feedback)]
    if text_cfg.handling == "ca":
        return build_ca_queries(query_tokens, feedback)
    return build_sw_queries(query_tokens, feedback, text_cfg.window)


def run_rerank_text_prf(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    text_cfg = config.text or TextPrfConfig()

    def one(query: Query):
        qid, text = query
        timer = _Timer()
        pool, texts = _bm25_pool_and_texts(index, corpus, qid, text, config)
        if pool.n == 0:
            return qid, pool, LatencyRecord(qid, timer.lap(), 0.0, 0.0, timer.total())
        rerank_scores = scorer.score_pairs(
            _truncated_query(text, config.profile),
            _truncated_passages(texts, config.profile),
        )
        base = reranked(pool, rerank_scores)
        first = timer.lap()
        k = min(text_cfg.depth_k, base.n)
        feedback = FeedbackSet(
            query_id=qid,
            passages=tuple(
                (e.passage_id, corpus[e.passage_id]) for e in base.entries[:k]
            ),
        )
        variants = build_text_variants(ws_tokens(text), feedback, text_cfg)
        build = timer.lap()
        variant_runs = [
            _score_variant(scorer, v, pool, texts, config.profile) for v in variants
        ]
        if text_cfg.handling == "ct":
            final = variant_runs[0]
        else:
            final = AGGREGATORS[text_cfg.aggregate](variant_runs)
        second = timer.lap()
        return qid, final, LatencyRecord(qid, first, build, second, timer.total())

    return _map_queries(queries, one, config.threads)


def _vector_rescore(
    pool: RankedList, store: EmbeddingStore, query_vector: np.ndarray
) -> RankedList:
    vectors = fetch_vectors(store, pool.passage_ids())
    fused64 = np.asarray(query_vector, dtype=np.float64)
    scores = [float(np.asarray(v, dtype=np.float64) @ fused64) for v in vectors]
    return reranked(pool, scores)


def run_rerank_vector(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    store: EmbeddingStore,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    """BM25 pool rescored by dot(query embedding, stored vector); no PRF."""

    def one(query: Query):
        qid, text = query
        timer = _Timer()
        pool, _ = _bm25_pool_and_texts(index, corpus, qid, text, config)
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        run = _vector_rescore(pool, store, qvec) if pool.n else pool
        first = timer.lap()
        return qid, run, LatencyRecord(qid, first, 0.0, 0.0, timer.total())

    return _map_queries(queries, one, config.threads)


def run_rerank_vector_prf(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    store: EmbeddingStore,
    scorer: ScorerBackend,
    config: PipelineConfig,
) -> tuple[dict[str, RankedList], list[LatencyRecord]]:
    prf = config.vector or PrfVectorConfig()

    def one(query: Query):
        qid, text = query
        timer = _Timer()
        pool, texts = _bm25_pool_and_texts(index, corpus, qid, text, config)
        if pool.n == 0:
            return qid, pool, LatencyRecord(qid, timer.lap(), 0.0, 0.0, timer.total())
        rerank_scores = scorer.score_pairs(
            _truncated_query(text, config.profile),
            _truncated_passages(texts, config.profile),
        )
        base = reranked(pool, rerank_scores)
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        first = timer.lap()
        # feedback comes from the reranked order, not the BM25 order
        feedback = select_feedback(base, store, prf.depth_k)
        fused = fuse(qvec, feedback, prf)
        build = timer.lap()
        final = _vector_rescore(pool, store, fused)
        second = timer.lap()
        return qid, final, LatencyRecord(qid, first, build, second, timer.total())

    return _map_queries(queries, one, config.threads)


# --- run file output --------------------------------------------------------

def write_run(runs: Mapping[str, RankedList], path, run_tag: str) -> None:
    """TREC run lines `query_id Q0 passage_id rank score tag`, 6-decimal
    scores, sorted by (query_id, rank). Byte-stable for identical inputs."""
    if not runs:
        raise EmptyInput("no runs to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for qid in sorted(runs):
            for entry in runs[qid].entries:
                fh.write(
                    f"{qid} Q0 {entry.passage_id} {entry.rank} "
                    f"{entry.score:.6f} {run_tag}\n"
                )


def format_run(runs: Mapping[str, RankedList], run_tag: str) -> str:
    lines = []
    for qid in sorted(runs):
        for entry in runs[qid].entries:
            lines.append(
                f"{qid} Q0 {entry.passage_id} {entry.rank} "
                f"{entry.score:.6f} {run_tag}\n"
            )
    return "".join(lines)


# --- parameter sweeps -------------------------------------------------------

SWEEP_HEADER = "k,alpha,beta,handling,aggregate,metric,value"


@dataclass(frozen=True)
class SweepRow:
    """One grid point. handling/aggregate are text-PRF columns and stay
    empty for vector sweeps; method is the vector fusion name, used for
    run-file naming and figure grouping but not serialized."""

    k: int
    alpha: float | None
    beta: float | None
    handling: str
    aggregate: str
    metric: str
    value: float
    method: str = ""

    def csv_line(self) -> str:
        alpha = "" if self.alpha is None else f"{self.alpha:g}"
        beta = "" if self.beta is None else f"{self.beta:g}"
        return (
            f"{self.k},{alpha},{beta},{self.handling},{self.aggregate},"
            f"{self.metric},{self.value:.4f}"
        )

    @property
    def family(self) -> str:
        """Grid axis label beyond k/alpha/beta."""
        if self.handling:
            return (
                f"{self.handling}/{self.aggregate}"
                if self.aggregate
                else self.handling
            )
        return self.method

    @property
    def run_name(self) -> str:
        parts = [f"k{self.k}"]
        if self.alpha is not None:
            parts.append(f"a{self.alpha:g}")
        if self.beta is not None:
            parts.append(f"b{self.beta:g}")
        if self.handling:
            parts.append(self.handling)
        if self.aggregate:
            parts.append(self.aggregate)
        if self.method:
            parts.append(self.method)
        return "-".join(parts)


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")


def _sorted_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Best value first; grid order breaks ties deterministically."""
    return sorted(
        rows,
        key=lambda r: (
            -r.value,
            r.k,
            r.alpha if r.alpha is not None else -1.0,
            r.beta if r.beta is not None else -1.0,
            r.handling,
            r.aggregate,
        ),
    )


def _metric_mean(
    runs: Mapping[str, RankedList],
    judgments: Judgments,
    metric: str,
    metric_config: MetricConfig,
) -> float:
    return evaluate_runs(runs, judgments, [metric], metric_config).mean(metric)


def _maybe_write_run(runs, out_dir, row: SweepRow, run_tag: str) -> None:
    if out_dir is None:
        return
    write_run(runs, f"{out_dir}/run-{row.run_name}.txt", f"{run_tag}-{row.run_name}")


def sweep_dense_prf(
    queries: Sequence[Query],
    store: EmbeddingStore,
    scorer: ScorerBackend,
    judgments: Judgments,
    metric: str = "recall@100",
    k_grid: Sequence[int] = (1, 3, 5, 10),
    alpha_grid: Sequence[float] = tuple(round(0.1 * i, 1) for i in range(1, 11)),
    beta_grid: Sequence[float] = tuple(round(0.1 * i, 1) for i in range(1, 11)),
    method: str = "rocchio",
    config: PipelineConfig | None = None,
    metric_config: MetricConfig = MetricConfig(),
    out_dir=None,
) -> list[SweepRow]:
    """Grid sweep of dense-retrieval PRF; one metric row per grid point.

    The first-stage search depends only on the query, so it is computed
    once per query and reused across the grid (results are identical to
    running each grid point end to end).
    """
    if not k_grid or (method == "rocchio" and (not alpha_grid or not beta_grid)):
        raise ValueError("sweep grids must be non-empty")
    config = config or PipelineConfig(flow="dense-prf")
    prepared: list[tuple[str, np.ndarray, RankedList]] = []
    for qid, text in queries:
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        first_run = top_k_search(store, qvec, config.first_stage_k)
        first_run.query_id = qid
        prepared.append((qid, qvec, first_run))
    feedback_cache: dict[tuple[str, int], list[np.ndarray]] = {}

    def point_runs(prf: PrfVectorConfig) -> dict[str, RankedList]:
        runs: dict[str, RankedList] = {}
        for qid, qvec, first_run in prepared:
            key = (qid, prf.depth_k)
            if key not in feedback_cache:
                feedback_cache[key] = select_feedback(first_run, store, prf.depth_k)
            fused = fuse(qvec, feedback_cache[key], prf)
            run = top_k_search(store, fused, config.first_stage_k)
            run.query_id = qid
            runs[qid] = run
        return runs

    rows: list[SweepRow] = []
    for k in k_grid:
        if method == "average":
            prf = PrfVectorConfig(method="average", depth_k=k)
            runs = point_runs(prf)
            row = SweepRow(
                k, None, None, "", "",
                metric, _metric_mean(runs, judgments, metric, metric_config),
                method="average",
            )
            rows.append(row)
            _maybe_write_run(runs, out_dir, row, config.run_tag)
            continue
        for alpha in alpha_grid:
            for beta in beta_grid:
                prf = PrfVectorConfig(
                    method="rocchio", depth_k=k, alpha=alpha, beta=beta
                )
                runs = point_runs(prf)
                row = SweepRow(
                    k, alpha, beta, "", "",
                    metric, _metric_mean(runs, judgments, metric, metric_config),
                    method="rocchio",
                )
                rows.append(row)
                _maybe_write_run(runs, out_dir, row, config.run_tag)
    return _sorted_rows(rows)


def sweep_rerank_text_prf(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    scorer: ScorerBackend,
    judgments: Judgments,
    metric: str = "ndcg@10",
    k_grid: Sequence[int] = (1, 3, 5, 10, 15, 20),
    handling_grid: Sequence[str] = ("ct", "ca", "sw"),
    aggregate_grid: Sequence[str] = ("avg", "max", "borda"),
    window: WindowSpec | None = None,
    config: PipelineConfig | None = None,
    metric_config: MetricConfig = MetricConfig(),
    out_dir=None,
) -> list[SweepRow]:
    """Grid sweep of text PRF over (handling, aggregate, k).

    Variant ranked lists are cached per query by variant token sequence, so
    shared variants (e.g. CA prefixes across k values, repeated aggregates)
    are scored once; results are identical to running each point alone.
    """
    if not k_grid or not handling_grid or not aggregate_grid:
        raise ValueError("sweep grids must be non-empty")
    config = config or PipelineConfig(flow="rerank-text-prf")
    window = window or WindowSpec()
    prepared = []
    for qid, text in queries:
        pool, texts = _bm25_pool_and_texts(index, corpus, qid, text, config)
        if pool.n == 0:
            prepared.append((qid, text, pool, texts, pool))
            continue
        scores = scorer.score_pairs(
            _truncated_query(text, config.profile),
            _truncated_passages(texts, config.profile),
        )
        prepared.append((qid, text, pool, texts, reranked(pool, scores)))
    variant_cache: dict[tuple[str, tuple[str, ...]], RankedList] = {}

    def variant_run(qid, variant, pool, texts) -> RankedList:
        key = (qid, variant.tokens)
        if key not in variant_cache:
            variant_cache[key] = _score_variant(
                scorer, variant, pool, texts, config.profile
            )
        return variant_cache[key]

    rows: list[SweepRow] = []
    for handling in handling_grid:
        aggregates = ("",) if handling == "ct" else tuple(aggregate_grid)
        for aggregate in aggregates:
            for k in k_grid:
                text_cfg = TextPrfConfig(
                    handling=handling,
                    depth_k=k,
                    aggregate=aggregate or "avg",
                    window=window,
                )
                runs: dict[str, RankedList] = {}
                for qid, text, pool, texts, base in prepared:
                    if base.n == 0:
                        runs[qid] = base
                        continue
                    depth = min(k, base.n)
                    feedback = FeedbackSet(
                        query_id=qid,
                        passages=tuple(
                            (e.passage_id, corpus[e.passage_id])
                            for e in base.entries[:depth]
                        ),
                    )
                    variants = build_text_variants(
                        ws_tokens(text), feedback, text_cfg
                    )
                    variant_runs = [
                        variant_run(qid, v, pool, texts) for v in variants
                    ]
                    if handling == "ct":
                        runs[qid] = variant_runs[0]
                    else:
                        runs[qid] = AGGREGATORS[text_cfg.aggregate](variant_runs)
                row = SweepRow(
                    k, None, None, handling, aggregate,
                    metric, _metric_mean(runs, judgments, metric, metric_config),
                )
                rows.append(row)
                _maybe_write_run(runs, out_dir, row, config.run_tag)
    return _sorted_rows(rows)


def sweep_rerank_vector_prf(
    queries: Sequence[Query],
    corpus: Mapping[str, str],
    index: InvertedIndex,
    store: EmbeddingStore,
    scorer: ScorerBackend,
    judgments: Judgments,
    metric: str = "ndcg@10",
    k_grid: Sequence[int] = (1, 3, 5, 10),
    alpha_grid: Sequence[float] = tuple(round(0.1 * i, 1) for i in range(1, 11)),
    beta_grid: Sequence[float] = tuple(round(0.1 * i, 1) for i in range(1, 11)),
    method: str = "rocchio",
    config: PipelineConfig | None = None,
    metric_config: MetricConfig = MetricConfig(),
    out_dir=None,
) -> list[SweepRow]:
    """Grid sweep of vector PRF in the reranking flow."""
    if not k_grid or (method == "rocchio" and (not alpha_grid or not beta_grid)):
        raise ValueError("sweep grids must be non-empty")
    config = config or PipelineConfig(flow="rerank-vector-prf")
    prepared = []
    for qid, text in queries:
        pool, texts = _bm25_pool_and_texts(index, corpus, qid, text, config)
        qvec = scorer.embed([_truncated_query(text, config.profile)])[0]
        if pool.n == 0:
            prepared.append((qid, qvec, pool, pool, None))
            continue
        scores = scorer.score_pairs(
            _truncated_query(text, config.profile),
            _truncated_passages(texts, config.profile),
        )
        base = reranked(pool, scores)
        pool_vectors = np.stack(
            [np.asarray(v, np.float64) for v in fetch_vectors(store, pool.passage_ids())]
        )
        prepared.append((qid, qvec, pool, base, pool_vectors))

    def point_runs(prf: PrfVectorConfig) -> dict[str, RankedList]:
        runs: dict[str, RankedList] = {}
        for qid, qvec, pool, base, pool_vectors in prepared:
            if base.n == 0:
                runs[qid] = base
                continue
            feedback = select_feedback(base, store, prf.depth_k)
            fused = fuse(qvec, feedback, prf)
            scores = pool_vectors @ np.asarray(fused, np.float64)
            runs[qid] = reranked(pool, [float(s) for s in scores])
        return runs

    rows: list[SweepRow] = []
    for k in k_grid:
        if method == "average":
            runs = point_runs(PrfVectorConfig(method="average", depth_k=k))
            row = SweepRow(
                k, None, None, "", "",
                metric, _metric_mean(runs, judgments, metric, metric_config),
                method="average",
            )
            rows.append(row)
            _maybe_write_run(runs, out_dir, row, config.run_tag)
            continue
        for alpha in alpha_grid:
            for beta in beta_grid:
                prf = PrfVectorConfig(
                    method="rocchio", depth_k=k, alpha=alpha, beta=beta
                )
                runs = point_runs(prf)
                row = SweepRow(
                    k, alpha, beta, "", "",
                    metric, _metric_mean(runs, judgments, metric, metric_config),
                    method="rocchio",
                )
                rows.append(row)
                _maybe_write_run(runs, out_dir, row, config.run_tag)
    return _sorted_rows(rows)


# --- latency ----------------------------------------------------------------

@dataclass(frozen=True)
class LatencySummary:
    flow: str
    query_count: int
    repetitions: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    stage_means_ms: dict[str, float]

    def lines(self) -> list[str]:
        out = [
            f"flow={self.flow} queries={self.query_count} "
            f"repetitions={self.repetitions}",
            f"total ms/q: mean={self.mean_ms:.3f} median={self.median_ms:.3f} "
            f"p95={self.p95_ms:.3f}",
        ]
        for stage, value in self.stage_means_ms.items():
            out.append(f"stage {stage}: mean {value:.3f} ms/q")
        return out


def measure_latency(
    run_fn: Callable[[Sequence[Query]], tuple[dict[str, RankedList], list[LatencyRecord]]],
    queries: Sequence[Query],
    repetitions: int = 1,
    flow: str = "",
) -> LatencySummary:
    """Mean/median/p95 total ms/q and per-stage means, warm-up pass excluded.

    Queries run sequentially inside run_fn (callers pass threads=1 configs)
    so per-query latency stays well-defined.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if not queries:
        raise ValueError("no queries to measure")
    run_fn(queries)  # warm-up, excluded from stats
    records: list[LatencyRecord] = []
    for _ in range(repetitions):
        _, latencies = run_fn(queries)
        records.extend(latencies)
    totals = np.array([r.total_ms for r in records])
    return LatencySummary(
        flow=flow,
        query_count=len(queries),
        repetitions=repetitions,
        mean_ms=float(totals.mean()),
        median_ms=float(np.median(totals)),
        p95_ms=float(np.percentile(totals, 95)),
        stage_means_ms={
            "first_stage": float(np.mean([r.first_stage_ms for r in records])),
            "prf_build": float(np.mean([r.prf_build_ms for r in records])),
            "second_stage": float(np.mean([r.second_stage_ms for r in records])),
        },
    )
