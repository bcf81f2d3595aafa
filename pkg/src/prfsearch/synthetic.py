"""Seeded synthetic corpora for benchmarks and acceptance checks.

Two generators, both deterministic functions of their seed:

* clustered_corpus — topical clusters with a vocabulary-mismatch split.
  Each topic has "head" passages that contain the topic's core words (the
  query terms) plus topic-tail vocabulary, and "tail" passages that share
  only the tail vocabulary. A query can find the heads directly; the tails
  are reachable only after feedback widens the query's vocabulary, so PRF
  has real headroom to improve recall.

* drift_corpus — a feedback-poisoning setup: few relevant heads per topic
  plus a large distractor cluster sharing two "ambiguous" query words.
  Shallow feedback stays on-topic; deep feedback drags distractors in,
  so effectiveness degrades as PRF depth grows.

random_store builds an unstructured store at a requested scale for
latency benchmarking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prfsearch.embedding_store import EmbeddingStore, build_store
from prfsearch.evaluation import Judgments


@dataclass
class SyntheticBenchmark:
    corpus: list[tuple[str, str]]
    queries: list[tuple[str, str]]
    judgments: Judgments

    @property
    def corpus_map(self) -> dict[str, str]:
        return dict(self.corpus)


def _sample_words(rng: np.random.Generator, pool: list[str], count: int) -> list[str]:
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return [pool[i] for i in idx]


def clustered_corpus(
    seed: int = 42,
    topics: int = 50,
    heads_per_topic: int = 10,
    tails_per_topic: int = 30,
    noise_passages: int = 8000,
    core_words: int = 3,
    head_tail_words: int = 8,
    tail_words: int = 12,
    tail_pool_size: int = 16,
    noise_vocab: int = 3000,
    noise_words: int = 12,
    judged_zero_per_topic: int = 5,
) -> SyntheticBenchmark:
    """Clustered topics where each query's relevant passages share vocabulary."""
    rng = np.random.default_rng(seed)
    background = [f"bg{j:04d}" for j in range(noise_vocab)]
    texts: list[str] = []
    labels: list[tuple[str, int] | None] = []  # (topic qid, grade) or None
    queries: list[tuple[str, str]] = []
    for t in range(topics):
        qid = f"q{t:03d}"
        cores = [f"t{t:03d}c{c}" for c in range(core_words)]
        tail_pool = [f"t{t:03d}w{j:02d}" for j in range(tail_pool_size)]
        queries.append((qid, " ".join(cores)))
        for h in range(heads_per_topic):
            words = cores + _sample_words(rng, tail_pool, head_tail_words)
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append((qid, 2 + (h % 2)))
        for _ in range(tails_per_topic):
            words = _sample_words(rng, tail_pool, tail_words)
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append((qid, 1))
    for _ in range(noise_passages):
        texts.append(" ".join(_sample_words(rng, background, noise_words)))
        labels.append(None)
    order = rng.permutation(len(texts))
    corpus: list[tuple[str, str]] = []
    judgments = Judgments()
    noise_ids: list[str] = []
    for new_pos, old_pos in enumerate(order):
        pid = f"p{new_pos:06d}"
        corpus.append((pid, texts[old_pos]))
        label = labels[old_pos]
        if label is not None:
            judgments.add(label[0], pid, label[1])
        else:
            noise_ids.append(pid)
    # a few judged non-relevant passages per query, trec-style
    for t in range(topics):
        qid = f"q{t:03d}"
        for i in rng.choice(len(noise_ids), size=judged_zero_per_topic, replace=False):
            pid = noise_ids[i]
            if pid not in judgments.grades[qid]:
                judgments.add(qid, pid, 0)
    return SyntheticBenchmark(corpus=corpus, queries=queries, judgments=judgments)


def drift_corpus(
    seed: int = 7,
    topics: int = 10,
    heads_per_topic: int = 4,
    core_words: int = 3,
    ambig_words: int = 2,
    head_tail_words: int = 8,
    topic_pool_size: int = 14,
    distractors_per_topic: int = 60,
    distractor_pool_size: int = 12,
    distractor_words: int = 8,
    noise_passages: int = 400,
    noise_vocab: int = 500,
    noise_words: int = 8,
) -> SyntheticBenchmark:
    """Few relevant heads, many distractors sharing the query's ambiguous words.

    Queries carry core words (found only in heads) plus ambiguous words
    drawn from the topic's distractor pool, so BM25 pools contain both
    groups and feedback deeper than heads_per_topic is mostly distractors.
    """
    rng = np.random.default_rng(seed)
    background = [f"bg{j:04d}" for j in range(noise_vocab)]
    texts: list[str] = []
    labels: list[tuple[str, int] | None] = []
    queries: list[tuple[str, str]] = []
    for t in range(topics):
        qid = f"q{t:03d}"
        cores = [f"t{t:03d}c{c}" for c in range(core_words)]
        topic_pool = [f"t{t:03d}w{j:02d}" for j in range(topic_pool_size)]
        distractor_pool = [f"t{t:03d}d{j:02d}" for j in range(distractor_pool_size)]
        ambig = distractor_pool[:ambig_words]
        queries.append((qid, " ".join(cores + ambig)))
        for h in range(heads_per_topic):
            words = cores + _sample_words(rng, topic_pool, head_tail_words)
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append((qid, 2 + (h % 2)))
        for _ in range(distractors_per_topic):
            words = _sample_words(rng, distractor_pool, distractor_words)
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append((qid, 0))
    for _ in range(noise_passages):
        texts.append(" ".join(_sample_words(rng, background, noise_words)))
        labels.append(None)
    order = rng.permutation(len(texts))
    corpus: list[tuple[str, str]] = []
    judgments = Judgments()
    for new_pos, old_pos in enumerate(order):
        pid = f"p{new_pos:06d}"
        corpus.append((pid, texts[old_pos]))
        label = labels[old_pos]
        if label is not None:
            judgments.add(label[0], pid, label[1])
    return SyntheticBenchmark(corpus=corpus, queries=queries, judgments=judgments)


def random_store(seed: int, count: int, dim: int) -> EmbeddingStore:
    """Unstructured store at benchmark scale (standard-normal float32 rows)."""
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((count, dim), dtype=np.float32)
    ids = [f"p{i:06d}" for i in range(count)]
    return EmbeddingStore(ids, matrix)


def random_queries(seed: int, count: int, tokens: int = 5) -> list[tuple[str, str]]:
    """Synthetic query texts (random word ids) for latency benchmarks."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        words = [f"w{int(w):05d}" for w in rng.integers(0, 50000, size=tokens)]
        out.append((f"q{i:04d}", " ".join(words)))
    return out
