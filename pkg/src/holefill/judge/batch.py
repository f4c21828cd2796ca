"""Batch judging with caching and bounded parallelism."""

from __future__ import annotations

import logging
import threading
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..collection import DataError, JudgmentKey, PassageStore, Qrels, Topic
from .backends import Backend, SamplingParams
from .cache import JudgeRecord, JudgmentCache
from .errors import BackendError, ExemplarError, JudgeError, ResolutionError
from .prompts import PromptMode, build_prompt, parse_score, prompt_hash, sample_exemplars

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JudgeFailure:
    key: JudgmentKey
    kind: str
    message: str


@dataclass
class BatchResult:
    records: list[JudgeRecord]
    failures: list[JudgeFailure]
    backend_calls: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_qrels(self, label: str = "") -> Qrels:
        return Qrels(((r.key, r.grade) for r in self.records), label=label)


class BatchFailed(JudgeError):
    def __init__(self, failures: Sequence[JudgeFailure]):
        self.failures = list(failures)
        head = "; ".join(f"{f.key}: {f.message}" for f in self.failures[:3])
        more = f" (+{len(self.failures) - 3} more)" if len(self.failures) > 3 else ""
        super().__init__(f"{len(self.failures)} judgments failed: {head}{more}")


@dataclass
class JudgeConfig:
    """Everything needed to judge a set of keys the same way."""

    backend: Backend
    mode: PromptMode = PromptMode.ZERO_SHOT
    sampling: SamplingParams = field(default_factory=SamplingParams)
    cache: JudgmentCache | None = None
    workers: int = 1
    exemplar_qrels: Qrels | None = None
    seed: int | None = None

    def describe(self) -> str:
        return (f"{self.backend.backend_id} {self.mode.value} T={self.sampling.temperature}"
                f" top_p={self.sampling.top_p}")

    def run(self, keys: Iterable[JudgmentKey], topics, passages: PassageStore) -> BatchResult:
        return judge_batch(keys, topics, passages, self.mode, self.backend, self.sampling,
                           self.cache, self.workers, self.exemplar_qrels, self.seed)


def _topic_index(topics: Mapping[str, Topic] | Iterable[Topic]) -> Mapping[str, Topic]:
    if isinstance(topics, Mapping):
        return topics
    return {t.topic_id: t for t in topics}


def judge_batch(keys: Iterable[JudgmentKey], topics: Mapping[str, Topic] | Iterable[Topic],
                passages: PassageStore, mode: PromptMode | str = PromptMode.ZERO_SHOT,
                backend: Backend | None = None, sampling: SamplingParams | None = None,
                cache: JudgmentCache | None = None, workers: int = 1,
                exemplar_qrels: Qrels | None = None, seed: int | None = None) -> BatchResult:
    """Judge every key; failures are collected per key instead of aborting the batch.

    Records come back in input order. Two-shot mode draws exemplars from
    ``exemplar_qrels`` with ``seed``.
    """
    if backend is None:
        raise ValueError("a backend is required")
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise DataError("duplicate judgment keys in one batch")
    mode = PromptMode(mode)
    sampling = sampling or SamplingParams()
    if mode is PromptMode.TWO_SHOT and (exemplar_qrels is None or seed is None):
        raise ExemplarError("two-shot judging needs exemplar qrels and an explicit seed")
    topic_index = _topic_index(topics)
    cache = cache if cache is not None else JudgmentCache()
    calls = 0
    calls_lock = threading.Lock()

    def judge_one(key: JudgmentKey) -> JudgeRecord | JudgeFailure:
        nonlocal calls
        try:
            topic = topic_index.get(key.topic_id)
            if topic is None:
                raise ResolutionError(f"unknown topic {key.topic_id!r}")
            try:
                text = passages[key.doc_id]
                exemplars = (sample_exemplars(exemplar_qrels, passages, key, seed)
                             if mode is PromptMode.TWO_SHOT else None)
            except DataError as exc:
                raise ResolutionError(str(exc)) from None
            prompt = build_prompt(topic, text, mode, exemplars)
        except JudgeError as exc:
            return JudgeFailure(key, "resolution", str(exc))
        digest = prompt_hash(prompt)
        hit = cache.get(digest, backend.backend_id, sampling, key)
        if hit is not None:
            return hit
        with calls_lock:
            calls += 1
        try:
            raw = backend.complete(prompt, key, sampling)
        except BackendError as exc:
            return JudgeFailure(key, "backend", str(exc))
        try:
            grade = parse_score(raw)
        except JudgeError as exc:
            return JudgeFailure(key, "unparseable", str(exc))
        record = JudgeRecord(key, grade, mode, backend.backend_id, sampling, raw, digest,
                             JudgeRecord.now())
        cache.put(record)
        return record

    if workers <= 1:
        outcomes = [judge_one(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(judge_one, keys))
    records = [o for o in outcomes if isinstance(o, JudgeRecord)]
    failures = [o for o in outcomes if isinstance(o, JudgeFailure)]
    for f in failures:
        logger.warning("judging %s failed (%s): %s", f.key, f.kind, f.message)
    return BatchResult(records, failures, calls)
