"""TREC-style evaluation: MAP, RR, nDCG@c, Recall@depth, paired t-test.

Conventions (all flag-settable where noted):

* grades are non-negative integers; "relevant" for MAP/RR/Recall means
  grade >= binary_threshold (default 1);
* unjudged retrieved passages count as grade 0;
* nDCG uses gain 2^grade - 1 with a log2(rank + 1) discount, ideal DCG
  from all judged grades sorted descending, and 0 when the ideal is 0;
* metrics are computed within eval_depth (default 1000); RR is 0 when no
  relevant passage appears within that depth;
* queries with no judgments at all raise UnknownQuery (the report layer
  warns and skips them); queries judged but with zero relevant passages
  are excluded from metric means.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from prfsearch.errors import DegenerateInput, ParseError, UnknownQuery
from prfsearch.types import RankedList, ScoredPassage

DEFAULT_METRICS = ("map", "rr", "ndcg@1", "ndcg@3", "ndcg@10", "recall@1000")


@dataclass
class Judgments:
    """Graded qrels: query_id -> (passage_id -> grade)."""

    grades: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, query_id: str, passage_id: str, grade: int) -> None:
        if grade < 0:
            raise ValueError(f"negative grade {grade} for ({query_id}, {passage_id})")
        per_query = self.grades.setdefault(query_id, {})
        if passage_id in per_query:
            raise ValueError(f"({query_id}, {passage_id}) judged twice")
        per_query[passage_id] = grade

    def query_ids(self) -> list[str]:
        return list(self.grades)

    def for_query(self, query_id: str) -> dict[str, int]:
        try:
            return self.grades[query_id]
        except KeyError:
            raise UnknownQuery(f"no judgments for query {query_id!r}") from None

    def relevant_count(self, query_id: str, threshold: int) -> int:
        return sum(1 for g in self.for_query(query_id).values() if g >= threshold)


@dataclass(frozen=True)
class MetricConfig:
    binary_threshold: int = 1
    ndcg_cutoffs: tuple[int, ...] = (1, 3, 10)
    eval_depth: int = 1000

    def __post_init__(self) -> None:
        if self.binary_threshold < 1:
            raise ValueError(
                f"binary_threshold must be >= 1, got {self.binary_threshold}"
            )
        if self.eval_depth < 1:
            raise ValueError(f"eval_depth must be >= 1, got {self.eval_depth}")


def _graded(run: RankedList, judged: Mapping[str, int], depth: int) -> list[int]:
    return [judged.get(e.passage_id, 0) for e in run.entries[:depth]]


def reciprocal_rank(
    run: RankedList, judgments: Judgments, config: MetricConfig = MetricConfig()
) -> float:
    """1/rank of the first relevant passage within eval_depth; 0 if none."""
    judged = judgments.for_query(run.query_id)
    for rank, grade in enumerate(
        _graded(run, judged, config.eval_depth), start=1
    ):
        if grade >= config.binary_threshold:
            return 1.0 / rank
    return 0.0


def average_precision(
    run: RankedList, judgments: Judgments, config: MetricConfig = MetricConfig()
) -> float:
    """Mean of precision@rank over retrieved relevant passages, over |R|."""
    judged = judgments.for_query(run.query_id)
    total_relevant = sum(
        1 for g in judged.values() if g >= config.binary_threshold
    )
    if total_relevant == 0:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for rank, grade in enumerate(_graded(run, judged, config.eval_depth), start=1):
        if grade >= config.binary_threshold:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / total_relevant


def ndcg_at(
    run: RankedList,
    judgments: Judgments,
    cutoff: int,
    config: MetricConfig = MetricConfig(),
) -> float:
    """DCG@cutoff / ideal DCG@cutoff with gain 2^grade - 1, discount log2(i+1)."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    judged = judgments.for_query(run.query_id)
    dcg = 0.0
    for rank, grade in enumerate(_graded(run, judged, cutoff), start=1):
        dcg += (2.0**grade - 1.0) / math.log2(rank + 1)
    ideal = 0.0
    for rank, grade in enumerate(
        sorted(judged.values(), reverse=True)[:cutoff], start=1
    ):
        ideal += (2.0**grade - 1.0) / math.log2(rank + 1)
    if ideal == 0.0:
        return 0.0
    return dcg / ideal


def recall_at(
    run: RankedList,
    judgments: Judgments,
    depth: int = 1000,
    config: MetricConfig = MetricConfig(),
) -> float:
    """|relevant in top depth| / |relevant judged|."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    judged = judgments.for_query(run.query_id)
    total_relevant = sum(
        1 for g in judged.values() if g >= config.binary_threshold
    )
    if total_relevant == 0:
        return 0.0
    found = sum(
        1
        for grade in _graded(run, judged, depth)
        if grade >= config.binary_threshold
    )
    return found / total_relevant


# --- paired t-test ---------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (modified Lentz)."""
    tiny = 1e-300
    eps = 1e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    frac = d
    for m in range(1, 300):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        frac *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < eps:
            return frac
    raise ArithmeticError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, absolute error well under 1e-8."""
    if a <= 0 or b <= 0:
        raise ValueError(f"a and b must be positive, got a={a} b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-tailed tail probability P(|T| >= |t|) for Student's t."""
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(
    per_query_a: Sequence[float], per_query_b: Sequence[float]
) -> tuple[float, float]:
    """Two-tailed paired t-test on per-query differences.

    Returns (t, p). All-zero differences give (0.0, 1.0) by convention;
    identical nonzero differences (zero variance, nonzero mean) are a
    DegenerateInput, as is n < 2.
    """
    if len(per_query_a) != len(per_query_b):
        raise DegenerateInput(
            f"paired samples differ in length: {len(per_query_a)} vs {len(per_query_b)}"
        )
    n = len(per_query_a)
    if n < 2:
        raise DegenerateInput(f"need at least 2 pairs, got {n}")
    diffs = [float(a) - float(b) for a, b in zip(per_query_a, per_query_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        raise DegenerateInput(
            "all differences identical and nonzero; t statistic undefined"
        )
    t = mean / math.sqrt(var / n)
    return t, student_t_sf2(t, n - 1)


# --- run / qrels IO --------------------------------------------------------

def load_qrels(path) -> Judgments:
    """Parse `query_id 0 passage_id grade` lines (whitespace-separated)."""
    judgments = Judgments()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 fields `query_id 0 passage_id grade`, got {len(parts)}",
                    line=lineno,
                )
            qid, _, pid, grade_text = parts
            try:
                grade = int(grade_text)
            except ValueError:
                raise ParseError(
                    f"grade {grade_text!r} is not an integer", line=lineno
                ) from None
            if grade < 0:
                raise ParseError(f"negative grade {grade}", line=lineno)
            try:
                judgments.add(qid, pid, grade)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    return judgments


def load_run(path) -> dict[str, RankedList]:
    """Parse a TREC run file into per-query RankedLists.

    Entries are re-sorted by (score desc, passage_id asc) per query; if the
    file order disagreed with that rule a warning is emitted.
    """
    rows: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(
                    f"expected 6 fields `query_id Q0 passage_id rank score tag`, "
                    f"got {len(parts)}",
                    line=lineno,
                )
            qid, _, pid, rank_text, score_text, _ = parts
            try:
                int(rank_text)
            except ValueError:
                raise ParseError(
                    f"rank {rank_text!r} is not an integer", line=lineno
                ) from None
            try:
                score = float(score_text)
            except ValueError:
                raise ParseError(
                    f"score {score_text!r} is not a number", line=lineno
                ) from None
            rows.setdefault(qid, []).append((pid, score))
    runs: dict[str, RankedList] = {}
    disordered: list[str] = []
    for qid, pairs in rows.items():
        ordered = sorted(pairs, key=lambda t: (-t[1], t[0]))
        if [p for p, _ in ordered] != [p for p, _ in pairs]:
            disordered.append(qid)
        runs[qid] = RankedList(
            query_id=qid,
            entries=[
                ScoredPassage(pid, score, rank)
                for rank, (pid, score) in enumerate(ordered, start=1)
            ],
        )
    if disordered:
        warnings.warn(
            f"run file {path} was not sorted by (score desc, id asc) for "
            f"queries {disordered[:5]}; entries re-sorted",
            stacklevel=2,
        )
    return runs


# --- per-run evaluation and report ----------------------------------------

def compute_metric(
    name: str,
    run: RankedList,
    judgments: Judgments,
    config: MetricConfig = MetricConfig(),
) -> float:
    """Evaluate one metric by name: map, rr, ndcg@C, recall@D."""
    if name == "map":
        return average_precision(run, judgments, config)
    if name == "rr":
        return reciprocal_rank(run, judgments, config)
    if name.startswith("ndcg@"):
        return ndcg_at(run, judgments, int(name.split("@", 1)[1]), config)
    if name.startswith("recall@"):
        return recall_at(run, judgments, int(name.split("@", 1)[1]), config)
    raise ValueError(f"unknown metric {name!r}")


@dataclass
class EvalReport:
    metrics: tuple[str, ...]
    per_query: dict[str, dict[str, float]]  # query_id -> metric -> value
    skipped_unjudged: list[str]
    skipped_no_relevant: list[str]

    def mean(self, metric: str) -> float:
        values = [row[metric] for row in self.per_query.values()]
        if not values:
            raise DegenerateInput("no evaluable queries")
        return sum(values) / len(values)

    def means(self) -> dict[str, float]:
        return {m: self.mean(m) for m in self.metrics}


def evaluate_runs(
    runs: Mapping[str, RankedList],
    judgments: Judgments,
    metrics: Sequence[str] = DEFAULT_METRICS,
    config: MetricConfig = MetricConfig(),
) -> EvalReport:
    """Per-query metric table over the evaluable queries of a run set.

    Queries without judgments are skipped with a warning; queries judged
    but with no relevant passage are excluded from the means.
    """
    if not metrics:
        raise ValueError("at least one metric is required")
    per_query: dict[str, dict[str, float]] = {}
    skipped_unjudged: list[str] = []
    skipped_no_relevant: list[str] = []
    for qid in sorted(runs):
        run = runs[qid]
        try:
            relevant = judgments.relevant_count(qid, config.binary_threshold)
        except UnknownQuery:
            skipped_unjudged.append(qid)
            continue
        if relevant == 0:
            skipped_no_relevant.append(qid)
            continue
        per_query[qid] = {
            m: compute_metric(m, run, judgments, config) for m in metrics
        }
    if skipped_unjudged:
        warnings.warn(
            f"{len(skipped_unjudged)} run queries have no judgments and were "
            f"skipped: {skipped_unjudged[:5]}",
            stacklevel=2,
        )
    return EvalReport(
        metrics=tuple(metrics),
        per_query=per_query,
        skipped_unjudged=skipped_unjudged,
        skipped_no_relevant=skipped_no_relevant,
    )


def write_metrics_csv(report: EvalReport, path) -> None:
    """CSV `query_id,metric,value` at 4 decimals, plus one ALL row per metric."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("query_id,metric,value\n")
        for qid in sorted(report.per_query):
            for metric in report.metrics:
                fh.write(f"{qid},{metric},{report.per_query[qid][metric]:.4f}\n")
        for metric in report.metrics:
            fh.write(f"ALL,{metric},{report.mean(metric):.4f}\n")
