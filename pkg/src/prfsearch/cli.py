"""Command-line entry point binding every module into runnable workflows.

Commands: index-lexical, index-dense, retrieve, rerank, sweep, eval,
bench, serve-check. Exit codes: 0 success, 1 usage error, 2 data error,
3 backend error. All commands are deterministic given identical inputs
and --seed. Report commands (eval, sweep, bench) render figures next to
their delimited outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from prfsearch import figures
from prfsearch.embedding_store import build_store, load_store, save_store
from prfsearch.errors import (
    BackendUnavailable,
    PrfSearchError,
    ProtocolError,
)
from prfsearch.evaluation import (
    DEFAULT_METRICS,
    MetricConfig,
    evaluate_runs,
    load_qrels,
    load_run,
    write_metrics_csv,
)
from prfsearch.lexical import (
    build_index,
    load_corpus,
    load_index,
    load_queries,
    save_index,
)
from prfsearch.pipelines import (
    PipelineConfig,
    TextPrfConfig,
    measure_latency,
    run_dense_retrieval_prf,
    run_dense_retrieve,
    run_lexical,
    run_rerank,
    run_rerank_text_prf,
    run_rerank_vector,
    run_rerank_vector_prf,
    sweep_dense_prf,
    sweep_rerank_text_prf,
    sweep_rerank_vector_prf,
    write_run,
    write_sweep_csv,
)
from prfsearch.prf_text import WindowSpec
from prfsearch.prf_vector import PrfVectorConfig
from prfsearch.scorer import (
    PROFILES,
    LocalHashBackend,
    RemoteBackend,
    truncate_for_model,
)
from prfsearch.synthetic import random_queries, random_store

ENV_MODEL_URL = "PRF_MODEL_URL"

USAGE_EXIT = 1
DATA_EXIT = 2
BACKEND_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the usage-error exit remapped from 2 to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _parse_int_grid(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return values


def _parse_float_grid(text: str) -> list[float]:
    """Either `a,b,c` or `start:stop:step` (inclusive, rounded to 6 dp)."""
    try:
        if ":" in text:
            start_text, stop_text, step_text = text.split(":")
            start, stop, step = float(start_text), float(stop_text), float(step_text)
            if step <= 0:
                raise ValueError
            values = []
            value = start
            while value <= stop + 1e-9:
                values.append(round(value, 6))
                value += step
        else:
            values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad float grid {text!r} (use `a,b,c` or `start:stop:step`)"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=42,
        help="seed for the local embedder and synthetic data (default 42)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for per-query work (default: available cores)",
    )


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend",
        choices=["local", "remote"],
        default="local",
        help="embedding/scoring backend (default local)",
    )
    parser.add_argument(
        "--dim",
        type=int,
        default=64,
        help="embedding dimension for the local backend (default 64)",
    )
    parser.add_argument(
        "--model-url",
        default=None,
        help=f"remote backend endpoint (default: ${ENV_MODEL_URL})",
    )
    parser.add_argument(
        "--chunk-size",
        type=int,
        default=32,
        help="texts per remote request (default 32)",
    )
    parser.add_argument(
        "--profile",
        choices=sorted(PROFILES),
        default=None,
        help="model truncation profile applied to queries/passages",
    )


def _resolve_backend(args) -> LocalHashBackend | RemoteBackend:
    if args.backend == "local":
        return LocalHashBackend(embed_dim=args.dim, seed=args.seed)
    url = args.model_url or os.environ.get(ENV_MODEL_URL)
    if not url:
        raise BackendUnavailable(
            f"remote backend needs --model-url or ${ENV_MODEL_URL}"
        )
    return RemoteBackend(url, chunk_size=args.chunk_size)


def _profile(args):
    return PROFILES[args.profile] if args.profile else None


def build_parser() -> _Parser:
    parser = _Parser(
        prog="prfsearch",
        description="Pseudo-relevance-feedback retrieval engine",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser(
        "index-lexical", help="build and persist a BM25 inverted index"
    )
    p.add_argument("--corpus", required=True, help="`<id>\\t<text>` corpus file")
    p.add_argument("--out", required=True, help="output index file (JSON)")
    _add_common(p)

    p = sub.add_parser(
        "index-dense", help="embed a corpus and persist the embedding store"
    )
    p.add_argument("--corpus", required=True, help="`<id>\\t<text>` corpus file")
    p.add_argument("--out", required=True, help="output embedding store file")
    _add_backend_flags(p)
    _add_common(p)

    p = sub.add_parser("retrieve", help="first-stage retrieval (+ vector PRF)")
    p.add_argument(
        "--flow",
        choices=["lexical", "dense", "dense-prf"],
        required=True,
    )
    p.add_argument("--queries", required=True, help="`<id>\\t<text>` queries file")
    p.add_argument("--out", required=True, help="output TREC run file")
    p.add_argument("--index", help="lexical index (flow lexical)")
    p.add_argument("--store", help="embedding store (dense flows)")
    p.add_argument("--first-stage-k", type=int, default=1000)
    p.add_argument("--fusion", choices=["average", "rocchio"], default="rocchio")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--k1", type=float, default=0.9, help="BM25 k1 (default 0.9)")
    p.add_argument("--b", type=float, default=0.4, help="BM25 b (default 0.4)")
    p.add_argument("--run-tag", default="prfsearch")
    _add_backend_flags(p)
    _add_common(p)

    p = sub.add_parser("rerank", help="two-stage reranking (+ text/vector PRF)")
    p.add_argument(
        "--flow",
        choices=[
            "rerank",
            "rerank-text-prf",
            "rerank-vector",
            "rerank-vector-prf",
        ],
        required=True,
    )
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True, help="lexical index file")
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True, help="output TREC run file")
    p.add_argument("--store", help="embedding store (vector flows)")
    p.add_argument("--first-stage-k", type=int, default=1000)
    p.add_argument("--text-handling", choices=["ct", "ca", "sw"], default="ca")
    p.add_argument("--aggregate", choices=["avg", "max", "borda"], default="avg")
    p.add_argument("--window-size", type=int, default=65)
    p.add_argument("--stride", type=int, default=32)
    p.add_argument("--fusion", choices=["average", "rocchio"], default="rocchio")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--run-tag", default="prfsearch")
    _add_backend_flags(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="grid sweep with per-point runs and metrics")
    p.add_argument(
        "--flow",
        choices=["dense-prf", "rerank-text-prf", "rerank-vector-prf"],
        required=True,
    )
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--corpus", help="corpus file (rerank flows)")
    p.add_argument("--index", help="lexical index (rerank flows)")
    p.add_argument("--store", help="embedding store (vector flows)")
    p.add_argument("--metric", default="ndcg@10")
    p.add_argument("--first-stage-k", type=int, default=1000)
    p.add_argument("--fusion", choices=["average", "rocchio"], default="rocchio")
    p.add_argument("--k-grid", type=_parse_int_grid, default=[1, 3, 5, 10])
    p.add_argument(
        "--alpha-grid", type=_parse_float_grid, default=[round(0.1 * i, 1) for i in range(1, 11)]
    )
    p.add_argument(
        "--beta-grid", type=_parse_float_grid, default=[round(0.1 * i, 1) for i in range(1, 11)]
    )
    p.add_argument(
        "--handling-grid",
        default="ct,ca,sw",
        help="comma list of text handlings (rerank-text-prf)",
    )
    p.add_argument(
        "--aggregate-grid",
        default="avg,max,borda",
        help="comma list of aggregations (rerank-text-prf)",
    )
    p.add_argument("--window-size", type=int, default=65)
    p.add_argument("--stride", type=int, default=32)
    p.add_argument("--binary-threshold", type=int, default=1)
    p.add_argument(
        "--no-run-files",
        action="store_true",
        help="skip per-grid-point run files (CSV and figures only)",
    )
    p.add_argument("--run-tag", default="prfsearch")
    _add_backend_flags(p)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True, help="TREC run file")
    p.add_argument("--qrels", required=True, help="qrels file")
    p.add_argument(
        "--metrics",
        default=",".join(DEFAULT_METRICS),
        help=f"comma list (default {','.join(DEFAULT_METRICS)})",
    )
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--binary-threshold", type=int, default=1)
    p.add_argument("--eval-depth", type=int, default=1000)
    _add_common(p)

    p = sub.add_parser("bench", help="latency benchmark on a synthetic store")
    p.add_argument(
        "--flow",
        choices=["dense", "dense-prf", "all"],
        default="all",
    )
    p.add_argument("--passages", type=int, default=100000)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--first-stage-k", type=int, default=1000)
    p.add_argument("--fusion", choices=["average", "rocchio"], default="rocchio")
    p.add_argument("--prf-depth", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--out", help="output directory for bench.csv and bench.png")
    _add_common(p)

    p = sub.add_parser("serve-check", help="probe a model server's wire contract")
    p.add_argument(
        "--model-url",
        default=None,
        help=f"endpoint (default: ${ENV_MODEL_URL})",
    )
    p.add_argument("--chunk-size", type=int, default=32)
    _add_common(p)

    return parser


# --- command implementations -------------------------------------------------

def _cmd_index_lexical(args) -> int:
    corpus = load_corpus(args.corpus)
    index = build_index(corpus)
    save_index(index, args.out)
    print(f"indexed {index.doc_count} passages, {index.term_count} terms -> {args.out}")
    return 0


def _cmd_index_dense(args) -> int:
    corpus = load_corpus(args.corpus)
    backend = _resolve_backend(args)
    if args.backend == "remote" and backend.embed_dim != args.dim:
        print(
            f"error: remote backend dim {backend.embed_dim} != requested --dim {args.dim}",
            file=sys.stderr,
        )
        return BACKEND_EXIT
    profile = _profile(args)
    texts = [text for _, text in corpus]
    if profile is not None:
        texts = [truncate_for_model(t, profile.passage_max_tokens) for t in texts]
    vectors = backend.embed(texts)
    store = build_store(
        list(zip((pid for pid, _ in corpus), vectors)), dim=backend.embed_dim
    )
    save_store(store, args.out)
    print(f"embedded {store.count} passages at dim {store.dim} -> {args.out}")
    return 0


def _pipeline_config(args, flow: str) -> PipelineConfig:
    from prfsearch.lexical import Bm25Params

    vector = None
    text = None
    if flow in ("dense-prf", "rerank-vector-prf"):
        vector = PrfVectorConfig(
            method=args.fusion,
            depth_k=args.prf_depth,
            alpha=args.alpha,
            beta=args.beta,
        )
    if flow == "rerank-text-prf":
        text = TextPrfConfig(
            handling=args.text_handling,
            depth_k=args.prf_depth,
            aggregate=args.aggregate,
            window=WindowSpec(args.window_size, args.stride),
        )
    return PipelineConfig(
        flow=flow,
        first_stage_k=args.first_stage_k,
        vector=vector,
        text=text,
        bm25=Bm25Params(k1=getattr(args, "k1", 0.9), b=getattr(args, "b", 0.4)),
        profile=_profile(args),
        run_tag=args.run_tag,
        threads=args.threads,
    )


def _cmd_retrieve(args, parser: _Parser) -> int:
    if args.flow == "lexical" and not args.index:
        parser.error("--index is required for --flow lexical")
    if args.flow in ("dense", "dense-prf") and not args.store:
        parser.error(f"--store is required for --flow {args.flow}")
    queries = load_queries(args.queries)
    config = _pipeline_config(args, args.flow)
    if args.flow == "lexical":
        index = load_index(args.index)
        runs, _ = run_lexical(queries, index, config)
    else:
        store = load_store(args.store)
        scorer = _resolve_backend(args)
        if scorer.embed_dim != store.dim:
            print(
                f"error: backend dim {scorer.embed_dim} != store dim {store.dim}",
                file=sys.stderr,
            )
            return BACKEND_EXIT
        if args.flow == "dense":
            runs, _ = run_dense_retrieve(queries, store, scorer, config)
        else:
            runs, _ = run_dense_retrieval_prf(queries, store, scorer, config)
    write_run(runs, args.out, args.run_tag)
    print(f"wrote {sum(r.n for r in runs.values())} lines for {len(runs)} queries -> {args.out}")
    return 0


def _cmd_rerank(args, parser: _Parser) -> int:
    if args.flow in ("rerank-vector", "rerank-vector-prf") and not args.store:
        parser.error(f"--store is required for --flow {args.flow}")
    queries = load_queries(args.queries)
    corpus = dict(load_corpus(args.corpus))
    index = load_index(args.index)
    config = _pipeline_config(args, args.flow)
    scorer = _resolve_backend(args)
    if args.flow == "rerank":
        runs, _ = run_rerank(queries, corpus, index, scorer, config)
    elif args.flow == "rerank-text-prf":
        runs, _ = run_rerank_text_prf(queries, corpus, index, scorer, config)
    else:
        store = load_store(args.store)
        if scorer.embed_dim != store.dim:
            print(
                f"error: backend dim {scorer.embed_dim} != store dim {store.dim}",
                file=sys.stderr,
            )
            return BACKEND_EXIT
        if args.flow == "rerank-vector":
            runs, _ = run_rerank_vector(queries, corpus, index, store, scorer, config)
        else:
            runs, _ = run_rerank_vector_prf(
                queries, corpus, index, store, scorer, config
            )
    write_run(runs, args.out, args.run_tag)
    print(f"wrote {sum(r.n for r in runs.values())} lines for {len(runs)} queries -> {args.out}")
    return 0


def _cmd_sweep(args, parser: _Parser) -> int:
    if args.flow in ("rerank-text-prf", "rerank-vector-prf"):
        if not args.corpus or not args.index:
            parser.error(f"--corpus and --index are required for --flow {args.flow}")
    if args.flow in ("dense-prf", "rerank-vector-prf") and not args.store:
        parser.error(f"--store is required for --flow {args.flow}")
    queries = load_queries(args.queries)
    judgments = load_qrels(args.qrels)
    metric_config = MetricConfig(binary_threshold=args.binary_threshold)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_dir = None if args.no_run_files else out_dir
    scorer = _resolve_backend(args)
    from prfsearch.lexical import Bm25Params

    # grids supply the per-point PRF settings; the base config only
    # carries flow-independent knobs
    config = PipelineConfig(
        flow=args.flow,
        first_stage_k=args.first_stage_k,
        bm25=Bm25Params(),
        profile=_profile(args),
        run_tag=args.run_tag,
        threads=args.threads,
    )
    if args.flow == "dense-prf":
        store = load_store(args.store)
        rows = sweep_dense_prf(
            queries, store, scorer, judgments,
            metric=args.metric,
            k_grid=args.k_grid,
            alpha_grid=args.alpha_grid,
            beta_grid=args.beta_grid,
            method=args.fusion,
            config=config,
            metric_config=metric_config,
            out_dir=runs_dir,
        )
    elif args.flow == "rerank-text-prf":
        corpus = dict(load_corpus(args.corpus))
        index = load_index(args.index)
        rows = sweep_rerank_text_prf(
            queries, corpus, index, scorer, judgments,
            metric=args.metric,
            k_grid=args.k_grid,
            handling_grid=[h for h in args.handling_grid.split(",") if h],
            aggregate_grid=[a for a in args.aggregate_grid.split(",") if a],
            window=WindowSpec(args.window_size, args.stride),
            config=config,
            metric_config=metric_config,
            out_dir=runs_dir,
        )
    else:
        corpus = dict(load_corpus(args.corpus))
        index = load_index(args.index)
        store = load_store(args.store)
        rows = sweep_rerank_vector_prf(
            queries, corpus, index, store, scorer, judgments,
            metric=args.metric,
            k_grid=args.k_grid,
            alpha_grid=args.alpha_grid,
            beta_grid=args.beta_grid,
            method=args.fusion,
            config=config,
            metric_config=metric_config,
            out_dir=runs_dir,
        )
    csv_path = out_dir / "sweep.csv"
    write_sweep_csv(rows, csv_path)
    figures.render_sweep_figure(rows, out_dir / "sweep.png")
    figures.render_sweep_heatmap(rows, out_dir / "sweep-heatmap.png")
    best = rows[0]
    print(f"{len(rows)} grid points -> {csv_path}")
    print(f"best: {best.csv_line()}")
    return 0


def _cmd_eval(args) -> int:
    runs = load_run(args.run)
    judgments = load_qrels(args.qrels)
    metrics = [m for m in args.metrics.split(",") if m]
    config = MetricConfig(
        binary_threshold=args.binary_threshold, eval_depth=args.eval_depth
    )
    report = evaluate_runs(runs, judgments, metrics, config)
    write_metrics_csv(report, args.out)
    figure_path = Path(args.out).with_suffix(".png")
    figures.render_eval_figure(report, figure_path)
    for metric in report.metrics:
        print(f"ALL {metric} {report.mean(metric):.4f}")
    print(f"wrote {args.out} and {figure_path}")
    return 0


def _cmd_bench(args) -> int:
    store = random_store(args.seed, args.passages, args.dim)
    queries = random_queries(args.seed + 1, args.queries)
    scorer = LocalHashBackend(embed_dim=args.dim, seed=args.seed)
    base_config = PipelineConfig(
        flow="dense", first_stage_k=args.first_stage_k, threads=1
    )
    prf_config = PipelineConfig(
        flow="dense-prf",
        first_stage_k=args.first_stage_k,
        vector=PrfVectorConfig(
            method=args.fusion,
            depth_k=args.prf_depth,
            alpha=args.alpha,
            beta=args.beta,
        ),
        threads=1,
    )
    summaries = {}
    if args.flow in ("dense", "all"):
        summaries["dense"] = measure_latency(
            lambda qs: run_dense_retrieve(qs, store, scorer, base_config),
            queries,
            repetitions=args.repetitions,
            flow="dense",
        )
    if args.flow in ("dense-prf", "all"):
        summaries["dense-prf"] = measure_latency(
            lambda qs: run_dense_retrieval_prf(qs, store, scorer, prf_config),
            queries,
            repetitions=args.repetitions,
            flow="dense-prf",
        )
    for summary in summaries.values():
        for line in summary.lines():
            print(line)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "bench.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(
                "flow,queries,repetitions,mean_ms,median_ms,p95_ms,"
                "first_stage_ms,prf_build_ms,second_stage_ms\n"
            )
            for name, s in summaries.items():
                fh.write(
                    f"{name},{s.query_count},{s.repetitions},{s.mean_ms:.3f},"
                    f"{s.median_ms:.3f},{s.p95_ms:.3f},"
                    f"{s.stage_means_ms['first_stage']:.3f},"
                    f"{s.stage_means_ms['prf_build']:.3f},"
                    f"{s.stage_means_ms['second_stage']:.3f}\n"
                )
        figures.render_latency_figure(summaries, out_dir / "bench.png")
        print(f"wrote {out_dir / 'bench.csv'} and {out_dir / 'bench.png'}")
    return 0


def _cmd_serve_check(args) -> int:
    url = args.model_url or os.environ.get(ENV_MODEL_URL)
    if not url:
        print(
            f"error: serve-check needs --model-url or ${ENV_MODEL_URL}",
            file=sys.stderr,
        )
        return USAGE_EXIT
    backend = RemoteBackend(url, chunk_size=args.chunk_size)
    print(f"health: status=ok model={backend.model!r} dim={backend.embed_dim}")
    vectors = backend.embed(["contract probe", "second text"])
    print(f"/embed: {len(vectors)} vectors of dim {len(vectors[0])}")
    scores = backend.score_pairs("contract probe", ["first passage", "second passage"])
    print(f"/score: {len(scores)} scores")
    print("wire contract ok")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "index-lexical":
            return _cmd_index_lexical(args)
        if args.command == "index-dense":
            return _cmd_index_dense(args)
        if args.command == "retrieve":
            return _cmd_retrieve(args, parser)
        if args.command == "rerank":
            return _cmd_rerank(args, parser)
        if args.command == "sweep":
            return _cmd_sweep(args, parser)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "serve-check":
            return _cmd_serve_check(args)
        parser.error(f"unknown command {args.command!r}")
    except (BackendUnavailable, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BACKEND_EXIT
    except (PrfSearchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
