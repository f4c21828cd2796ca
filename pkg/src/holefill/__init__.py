"""Pooling, LLM hole filling and ranking-stability analysis for TREC-style test collections."""

__version__ = "0.1.0"

# on-disk formats this version reads and writes
FORMAT_VERSIONS = {
    "run": "trec-6col",
    "qrels": "trec-4col",
    "topics": "normalized-v1",
    "judge-cache": "judge-record-v1",
}

from .collection import (DataError, Grade, JudgmentKey, MergePolicy, PassageNotFound, PassageStore,
                         Qrels, Run, RunEntry, Topic, binarize, merge_qrels)
from .metrics import ALL_METRICS, EvalResult, MetricId, evaluate_run
from .pooling import Pool, build_pool, holes, unique_contribution, unjudged_at
from .stats import (ConfusionMatrix, RankedSystems, cohen_kappa, confusion, kendall_tau, rbo_ext,
                    spearman_rho)

__all__ = [
    "DataError", "Grade", "JudgmentKey", "MergePolicy", "PassageNotFound", "PassageStore", "Qrels",
    "Run", "RunEntry", "Topic", "binarize", "merge_qrels", "ALL_METRICS", "EvalResult", "MetricId",
    "evaluate_run", "Pool", "build_pool", "holes", "unique_contribution", "unjudged_at",
    "ConfusionMatrix", "RankedSystems", "cohen_kappa", "confusion", "kendall_tau", "rbo_ext",
    "spearman_rho",
]
