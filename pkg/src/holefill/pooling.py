"""Depth-k pooling, judgment holes and per-run unique contributions."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from types import MappingProxyType

from .collection import DataError, JudgmentKey, Qrels, Run

logger = logging.getLogger(__name__)

DEFAULT_DEPTH = 10


@dataclass(frozen=True)
class Pool:
    depth: int
    per_topic: Mapping[str, Mapping[str, frozenset[str]]]

    def keys(self) -> list[JudgmentKey]:
        return [JudgmentKey(t, d) for t in sorted(self.per_topic) for d in sorted(self.per_topic[t])]

    def contributors(self, key: JudgmentKey) -> frozenset[str]:
        return self.per_topic.get(key.topic_id, {}).get(key.doc_id, frozenset())

    def run_tags(self) -> set[str]:
        return {tag for docs in self.per_topic.values() for tags in docs.values() for tag in tags}

    def __len__(self) -> int:
        return sum(len(docs) for docs in self.per_topic.values())

    def __contains__(self, key: object) -> bool:
        return isinstance(key, JudgmentKey) and bool(self.contributors(key))


def build_pool(runs: Iterable[Run], depth: int = DEFAULT_DEPTH) -> Pool:
    if depth < 1:
        raise ValueError(f"pool depth must be >= 1, got {depth}")
    runs = list(runs)
    tags = [r.tag for r in runs]
    if len(set(tags)) != len(tags):
        raise DataError("run tags must be unique")
    acc: dict[str, dict[str, set[str]]] = {}
    for run in runs:
        for topic_id in run.topics():
            docs = acc.setdefault(topic_id, {})
            for doc_id in run.ranking(topic_id, depth):
                docs.setdefault(doc_id, set()).add(run.tag)
    frozen = {t: MappingProxyType({d: frozenset(acc[t][d]) for d in sorted(acc[t])})
              for t in sorted(acc)}
    return Pool(depth, MappingProxyType(frozen))


def holes(pool: Pool, qrels: Qrels) -> set[JudgmentKey]:
    return {key for key in pool.keys() if key not in qrels}


def unique_contribution(pool: Pool, run_tag: str) -> set[JudgmentKey]:
    """Pooled keys contributed by ``run_tag`` and by no other run."""
    if run_tag not in pool.run_tags():
        raise KeyError(f"run {run_tag!r} does not contribute to the pool")
    only = frozenset([run_tag])
    return {JudgmentKey(t, d) for t, docs in pool.per_topic.items()
            for d, tags in docs.items() if tags == only}


def top_keys(run: Run, depth: int) -> set[JudgmentKey]:
    return {JudgmentKey(t, d) for t in run.topics() for d in run.ranking(t, depth)}


def unjudged_at(run: Run, qrels: Qrels, k: int = 10) -> float:
    """Mean over qrels topics of the unjudged fraction of the run's top k.

    The fraction's denominator is min(k, retrieved); topics where the run
    retrieves nothing count as 0.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    topics = qrels.topics()
    if not topics:
        return 0.0
    total = 0.0
    empty = 0
    for topic_id in topics:
        top = run.ranking(topic_id, k)
        if not top:
            empty += 1
            continue
        judged = qrels.for_topic(topic_id)
        total += sum(1 for d in top if d not in judged) / len(top)
    if empty:
        logger.info("run %s retrieves nothing for %d of %d judged topics", run.tag, empty, len(topics))
    return total / len(topics)
