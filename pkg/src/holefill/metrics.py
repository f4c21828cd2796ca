"""trec_eval-compatible retrieval metrics.

Unjudged documents count as grade 0. Graded metrics use linear gain
(gain = grade) with a log2(rank + 1) discount; binary metrics treat
grade >= ``threshold`` as relevant.
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .collection import DEFAULT_THRESHOLD, Grade, Qrels, Run

logger = logging.getLogger(__name__)


class MetricId(str, enum.Enum):
    NDCG_CUT_3 = "ndcg_cut_3"
    NDCG_CUT_5 = "ndcg_cut_5"
    NDCG = "ndcg"
    P_10 = "P_10"
    RECALL_10 = "recall_10"
    RECALL_1000 = "recall_1000"
    MAP = "map"
    RECIP_RANK = "recip_rank"

    def __str__(self) -> str:
        return self.value


ALL_METRICS: tuple[MetricId, ...] = tuple(MetricId)
BINARY_METRICS = (MetricId.P_10, MetricId.RECALL_10, MetricId.RECALL_1000,
                  MetricId.MAP, MetricId.RECIP_RANK)


def parse_metrics(spec: str | Iterable[str]) -> tuple[MetricId, ...]:
    """``"all"`` or a comma-separated list of metric names."""
    if isinstance(spec, str):
        if spec.strip() == "all":
            return ALL_METRICS
        spec = [s for s in spec.split(",") if s.strip()]
    try:
        return tuple(MetricId(s.strip()) for s in spec)
    except ValueError as exc:
        valid = ", ".join(m.value for m in ALL_METRICS)
        raise ValueError(f"{exc}; valid metrics: {valid}") from None


def gain(grade: int | None) -> float:
    return 0.0 if grade is None else float(Grade.of(grade))


def _dcg(gains: Iterable[float]) -> float:
    return sum(g / math.log2(i + 1) for i, g in enumerate(gains, 1))


def ndcg_at(ranking: Sequence[str], judged: Mapping[str, int], k: int | None = None) -> float:
    """nDCG of ``ranking`` against ``judged`` (docId -> grade); ``k=None`` is full depth."""
    if k is not None and k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    retrieved = ranking if k is None else ranking[:k]
    dcg = _dcg(gain(judged.get(d)) for d in retrieved)
    ideal = sorted((gain(g) for g in judged.values()), reverse=True)
    if k is not None:
        ideal = ideal[:k]
    idcg = _dcg(ideal)
    return dcg / idcg if idcg > 0 else 0.0


def binary_metrics(ranking: Sequence[str], judged: Mapping[str, int],
                   threshold: int = DEFAULT_THRESHOLD) -> dict[MetricId, float]:
    relevant = {d for d, g in judged.items() if g >= threshold}
    n_rel = len(relevant)
    hits = 0
    hits_at: dict[int, int] = {}
    precision_sum = 0.0
    first_hit = 0
    for rank, doc_id in enumerate(ranking, 1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / rank
            if not first_hit:
                first_hit = rank
        if rank in (10, 1000):
            hits_at[rank] = hits
    hits_10 = hits_at.get(10, hits)
    hits_1000 = hits_at.get(1000, hits)
    return {
        MetricId.P_10: hits_10 / 10,
        MetricId.RECALL_10: hits_10 / n_rel if n_rel else 0.0,
        MetricId.RECALL_1000: hits_1000 / n_rel if n_rel else 0.0,
        MetricId.MAP: precision_sum / n_rel if n_rel else 0.0,
        MetricId.RECIP_RANK: 1.0 / first_hit if first_hit else 0.0,
    }


def evaluate_topic(ranking: Sequence[str], judged: Mapping[str, int],
                   metrics: Sequence[MetricId] = ALL_METRICS,
                   threshold: int = DEFAULT_THRESHOLD) -> dict[MetricId, float]:
    out: dict[MetricId, float] = {}
    if any(m in BINARY_METRICS for m in metrics):
        binary = binary_metrics(ranking, judged, threshold)
    for metric in metrics:
        if metric is MetricId.NDCG_CUT_3:
            out[metric] = ndcg_at(ranking, judged, 3)
        elif metric is MetricId.NDCG_CUT_5:
            out[metric] = ndcg_at(ranking, judged, 5)
        elif metric is MetricId.NDCG:
            out[metric] = ndcg_at(ranking, judged, None)
        else:
            out[metric] = binary[metric]
    return out


@dataclass
class EvalResult:
    run_tag: str
    per_topic: dict[str, dict[MetricId, float]]
    mean: dict[MetricId, float]
    threshold: int = DEFAULT_THRESHOLD
    metrics: tuple[MetricId, ...] = field(default=ALL_METRICS)

    def records(self) -> list[dict]:
        """Line-delimited report records, per topic then ``"all"``."""
        rows = []
        for topic_id, values in self.per_topic.items():
            rows += [{"runTag": self.run_tag, "topicId": topic_id, "metric": m.value,
                      "value": values[m]} for m in self.metrics]
        rows += [{"runTag": self.run_tag, "topicId": "all", "metric": m.value,
                  "value": self.mean[m]} for m in self.metrics]
        return rows


def evaluate_run(run: Run, qrels: Qrels, metrics: Sequence[MetricId] = ALL_METRICS,
                 threshold: int = DEFAULT_THRESHOLD) -> EvalResult:
    """Per-topic and mean metrics over every topic present in ``qrels``.

    Topics missing from the run score 0; run topics without judgments are
    ignored, as trec_eval does.
    """
    metrics = tuple(MetricId(m) for m in metrics)
    per_topic: dict[str, dict[MetricId, float]] = {}
    for topic_id in qrels.topics():
        per_topic[topic_id] = evaluate_topic(run.ranking(topic_id), qrels.for_topic(topic_id),
                                             metrics, threshold)
    unjudged_topics = set(run.topics()) - set(per_topic)
    if unjudged_topics:
        logger.debug("run %s: %d topics have no judgments and are excluded",
                     run.tag, len(unjudged_topics))
    n = len(per_topic)
    mean = {m: (sum(v[m] for v in per_topic.values()) / n if n else 0.0) for m in metrics}
    return EvalResult(run.tag, per_topic, mean, threshold, metrics)
