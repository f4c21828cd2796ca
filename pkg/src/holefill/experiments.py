"""System-ranking experiments: whole-pool regeneration, Kendall@K and leave-one-run-out."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .collection import DEFAULT_THRESHOLD, DataError, JudgmentKey, MergePolicy, PassageStore, Qrels, Run, merge_qrels
from .judge import BatchFailed, JudgeConfig, JudgeError
from .metrics import ALL_METRICS, MetricId, evaluate_run
from .pooling import DEFAULT_DEPTH, Pool, build_pool, top_keys, unique_contribution, unjudged_at
from .stats import RankedSystems, StatsError, kendall_tau, rbo_ext, spearman_rho

logger = logging.getLogger(__name__)

UNJUDGED_K = 10
DEFAULT_RBO_P = 0.9


def rank_all(runs: Sequence[Run], qrels: Qrels, metrics: Sequence[MetricId] = ALL_METRICS,
             threshold: int = DEFAULT_THRESHOLD) -> dict[MetricId, RankedSystems]:
    """One evaluation pass per run, ranked separately for every metric."""
    if len(runs) < 2:
        raise DataError(f"need at least 2 runs to rank, got {len(runs)}")
    means = {run.tag: evaluate_run(run, qrels, metrics, threshold).mean for run in runs}
    return {m: RankedSystems({tag: mean[m] for tag, mean in means.items()}) for m in metrics}


def rank_systems(runs: Sequence[Run], qrels: Qrels, metric: MetricId | str,
                 threshold: int = DEFAULT_THRESHOLD) -> RankedSystems:
    metric = MetricId(metric)
    return rank_all(runs, qrels, (metric,), threshold)[metric]


def regenerate_pool(pool: Pool, judge: JudgeConfig, topics, passages: PassageStore) -> Qrels:
    """Automatic judgments for every pooled key.

    Any per-key failure aborts with :class:`BatchFailed`; judgments made so
    far stay in the judge's cache.
    """
    result = judge.run(pool.keys(), topics, passages)
    if result.failures:
        raise BatchFailed(result.failures)
    return result.to_qrels(label=f"auto[{judge.describe()}] pool-depth={pool.depth}")


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except StatsError as exc:
        logger.warning("%s undefined: %s", fn.__name__, exc)
        return math.nan


@dataclass(frozen=True)
class CorrelationRow:
    metric: MetricId
    tau: float
    rho: float
    rbo: float
    n_systems: int

    def to_record(self) -> dict:
        return {"metric": self.metric.value, "tau": self.tau, "rho": self.rho, "rbo": self.rbo,
                "n_systems": self.n_systems}


def compare_rankings(metric: MetricId, a: RankedSystems, b: RankedSystems,
                     p: float = DEFAULT_RBO_P) -> CorrelationRow:
    return CorrelationRow(metric, _safe(kendall_tau, a, b), _safe(spearman_rho, a, b),
                          rbo_ext(a.tags, b.tags, p), len(a))


def correlate_rankings(runs: Sequence[Run], qrels_a: Qrels, qrels_b: Qrels,
                       metrics: Sequence[MetricId] = ALL_METRICS, p: float = DEFAULT_RBO_P,
                       threshold: int = DEFAULT_THRESHOLD) -> list[CorrelationRow]:
    """tau / rho / RBO between the system orderings induced by two qrels, per metric.

    Undefined correlations (an ordering that is entirely tied) are NaN.
    """
    ranked_a = rank_all(runs, qrels_a, metrics, threshold)
    ranked_b = rank_all(runs, qrels_b, metrics, threshold)
    return [compare_rankings(m, ranked_a[m], ranked_b[m], p) for m in metrics]


@dataclass
class KendallAtK:
    metric: MetricId
    points: list[tuple[int, float]]


def kendall_at_k(runs: Sequence[Run], human: Qrels, auto: Qrels, metric: MetricId | str,
                 threshold: int = DEFAULT_THRESHOLD) -> KendallAtK:
    """tau between the two orderings of the K best systems under ``human``, K = 2..n."""
    metric = MetricId(metric)
    by_human = rank_systems(runs, human, metric, threshold)
    by_auto = rank_systems(runs, auto, metric, threshold)
    points = []
    for k in range(2, len(by_human) + 1):
        best = by_human.tags[:k]
        points.append((k, _safe(kendall_tau, by_human.restrict(best), by_auto.restrict(best))))
    return KendallAtK(metric, points)


@dataclass(frozen=True)
class RankShiftRow:
    run_tag: str
    unjudged_at_10: float
    rank_human: int
    rank_hybrid: int
    abs_shift: int
    metric: MetricId
    removed: int = 0
    prior_holes: int = 0

    def to_record(self) -> dict:
        return {"runTag": self.run_tag, "metric": self.metric.value,
                "unjudgedAt10": self.unjudged_at_10, "rankHuman": self.rank_human,
                "rankHybrid": self.rank_hybrid, "absShift": self.abs_shift,
                "removed": self.removed, "priorHoles": self.prior_holes}


@dataclass
class LoroOutcome:
    target: str
    hybrid: Qrels
    reduced: Qrels
    removed: set[JudgmentKey]
    prior_holes: set[JudgmentKey]
    rows: dict[MetricId, RankShiftRow]


def leave_one_run_out(runs: Sequence[Run], human: Qrels, target: str, judge: JudgeConfig,
                      topics, passages: PassageStore, depth: int = DEFAULT_DEPTH,
                      metrics: Sequence[MetricId] = (MetricId.NDCG_CUT_5,),
                      threshold: int = DEFAULT_THRESHOLD,
                      human_rankings: Mapping[MetricId, RankedSystems] | None = None) -> LoroOutcome:
    """Simulate ``target`` as a new run that never contributed to the pool.

    Judgments only ``target`` contributed are dropped from ``human``; those
    keys and the target's pre-existing holes in its top ``depth`` are judged
    automatically and merged back. Judgments shared with any other run are
    kept as they are.
    """
    by_tag = {r.tag: r for r in runs}
    if target not in by_tag:
        raise KeyError(f"unknown run {target!r}")
    metrics = tuple(MetricId(m) for m in metrics)
    pool = build_pool(runs, depth)
    removed = unique_contribution(pool, target) & set(human)
    reduced = human.without(removed, label=f"{human.label} minus unique({target})")
    prior_holes = {k for k in top_keys(by_tag[target], depth) if k not in human}
    to_judge = sorted(removed | prior_holes)
    result = judge.run(to_judge, topics, passages)
    if result.failures:
        raise BatchFailed(result.failures)
    fill = result.to_qrels(label=f"auto[{judge.describe()}]")
    # fill keys are disjoint from reduced by construction
    hybrid = merge_qrels(reduced, fill, MergePolicy.ERROR_ON_CONFLICT)
    if human_rankings is None:
        human_rankings = rank_all(runs, human, metrics, threshold)
    hybrid_rankings = rank_all(runs, hybrid, metrics, threshold)
    unjudged = unjudged_at(by_tag[target], reduced, UNJUDGED_K)
    rows = {}
    for m in metrics:
        before = human_rankings[m].position(target)
        after = hybrid_rankings[m].position(target)
        rows[m] = RankShiftRow(target, unjudged, before, after, abs(before - after), m,
                               len(removed), len(prior_holes))
    return LoroOutcome(target, hybrid, reduced, removed, prior_holes, rows)


@dataclass
class ShiftReport:
    rows: list[RankShiftRow]
    failures: dict[str, str] = field(default_factory=dict)

    def for_metric(self, metric: MetricId | str) -> list[RankShiftRow]:
        metric = MetricId(metric)
        return [r for r in self.rows if r.metric is metric]


def rank_shift_report(runs: Sequence[Run], human: Qrels, judge: JudgeConfig, topics,
                      passages: PassageStore, depth: int = DEFAULT_DEPTH,
                      metrics: Sequence[MetricId] = (MetricId.NDCG_CUT_5,),
                      threshold: int = DEFAULT_THRESHOLD, workers: int = 1) -> ShiftReport:
    """Leave-one-run-out for every run; rows sorted by Unjudged@10 then tag."""
    metrics = tuple(MetricId(m) for m in metrics)
    human_rankings = rank_all(runs, human, metrics, threshold)

    def one(tag: str):
        try:
            return leave_one_run_out(runs, human, tag, judge, topics, passages, depth, metrics,
                                     threshold, human_rankings)
        except (JudgeError, DataError) as exc:
            return exc

    tags = sorted(r.tag for r in runs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, tags))
    else:
        outcomes = [one(t) for t in tags]
    rows: list[RankShiftRow] = []
    failures: dict[str, str] = {}
    for tag, outcome in zip(tags, outcomes):
        if isinstance(outcome, Exception):
            failures[tag] = str(outcome)
        else:
            rows.extend(outcome.rows.values())
    rows.sort(key=lambda r: (r.metric.value, r.unjudged_at_10, r.run_tag))
    return ShiftReport(rows, failures)


def write_series(points: Iterable[tuple[float, float]], stream) -> None:
    """Plain two-column (x, y) series for external plotting."""
    for x, y in points:
        stream.write(f"{x!r}\t{y!r}\n")
