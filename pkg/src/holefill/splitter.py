"""Fine-tuning data: per-topic class balancing, constrained train/test/valid split, export."""

from __future__ import annotations

import json
import logging
import math
import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .collection import DEFAULT_THRESHOLD, JudgmentKey, PassageStore, Qrels, Topic
from .judge.prompts import Exemplar, PromptMode, build_prompt, sample_exemplars

logger = logging.getLogger(__name__)

SPLITS = ("train", "test", "valid")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0
    relevance_threshold: int = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ValueError(f"need three positive ratios (train, test, valid), got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {sum(self.ratios)}")


@dataclass
class SplitResult:
    train: Qrels
    test: Qrels
    valid: Qrels
    removed_count: int = 0
    excluded: Qrels = field(default_factory=Qrels)

    def parts(self) -> dict[str, Qrels]:
        return {"train": self.train, "test": self.test, "valid": self.valid}

    def manifest_lines(self) -> list[str]:
        """``topicId docId split`` for every assigned or excluded key, in key order."""
        assigned = [(k, name) for name, part in self.parts().items() for k in part]
        assigned += [(k, "excluded") for k in self.excluded]
        return [f"{k.topic_id} {k.doc_id} {name}" for k, name in sorted(assigned)]

    def write_manifest(self, stream) -> None:
        for line in self.manifest_lines():
            stream.write(line + "\n")


def _partition(judged: Mapping[str, int], threshold: int) -> tuple[list[str], list[str]]:
    rel = sorted(d for d, g in judged.items() if g >= threshold)
    non = sorted(d for d, g in judged.items() if g < threshold)
    return rel, non


def balance_qrels(qrels: Qrels, threshold: int = DEFAULT_THRESHOLD,
                  seed: int = 0) -> tuple[Qrels, int]:
    """Drop random non-relevant keys per topic until #non-relevant <= #relevant."""
    rng = random.Random(seed)
    drop: list[JudgmentKey] = []
    for topic_id in qrels.topics():
        rel, non = _partition(qrels.for_topic(topic_id), threshold)
        excess = len(non) - len(rel)
        if excess > 0:
            drop += [JudgmentKey(topic_id, d) for d in rng.sample(non, excess)]
    label = f"{qrels.label} balanced(seed={seed}, threshold={threshold})"
    return qrels.without(drop, label=label), len(drop)


def _allocate(shares: list[float], rooms: list[int], target: int) -> list[int]:
    """Largest-remainder rounding: floors first, then +1 by descending fraction.

    Each count stays within one of its share and within its room.
    """
    counts = [min(math.floor(s), r) for s, r in zip(shares, rooms)]
    extra = target - sum(counts)
    order = sorted(range(len(shares)), key=lambda i: (-(shares[i] - math.floor(shares[i])), i))
    for i in order:
        if extra <= 0:
            break
        if counts[i] < rooms[i] and counts[i] + 1 <= shares[i] + 1:
            counts[i] += 1
            extra -= 1
    return counts


def split(balanced: Qrels, spec: SplitSpec = SplitSpec()) -> SplitResult:
    """Randomly assign each topic's keys to train/test/valid.

    Every topic keeps one relevant and one non-relevant key in train. Test
    and valid sizes are allocated by largest remainder over all topics, so
    each topic is within one item of its ratio share and the global sizes
    are the rounded global shares whenever topic capacity allows. Topics
    lacking either class are excluded.
    """
    rng = random.Random(spec.seed)
    _, r_test, r_valid = spec.ratios
    excluded: list[tuple[JudgmentKey, int]] = []
    prepared: list[tuple[str, list[str], list[str]]] = []
    for topic_id in balanced.topics():
        judged = balanced.for_topic(topic_id)
        rel, non = _partition(judged, spec.relevance_threshold)
        if not rel or not non:
            logger.warning("topic %s lacks a relevant or non-relevant key; excluded from split", topic_id)
            excluded += [(JudgmentKey(topic_id, d), judged[d]) for d in sorted(judged)]
            continue
        rng.shuffle(rel)
        rng.shuffle(non)
        anchors = [rel.pop(), non.pop()]
        rest = rel + non
        rng.shuffle(rest)
        prepared.append((topic_id, anchors, rest))

    sizes = [len(a) + len(r) for _, a, r in prepared]
    total = sum(sizes)
    rooms = [len(r) for _, _, r in prepared]
    n_test = _allocate([r_test * n for n in sizes], rooms, round(r_test * total))
    rooms = [room - c for room, c in zip(rooms, n_test)]
    n_valid = _allocate([r_valid * n for n in sizes], rooms, round(r_valid * total))

    parts: dict[str, list[tuple[JudgmentKey, int]]] = {name: [] for name in SPLITS}
    for (topic_id, anchors, rest), t, v in zip(prepared, n_test, n_valid):
        judged = balanced.for_topic(topic_id)
        assigned = {"test": rest[:t], "valid": rest[t:t + v], "train": anchors + rest[t + v:]}
        for name, docs in assigned.items():
            parts[name] += [(JudgmentKey(topic_id, d), judged[d]) for d in docs]
    label = f"{balanced.label} split(seed={spec.seed})"
    return SplitResult(
        train=Qrels(parts["train"], label=f"{label}:train"),
        test=Qrels(parts["test"], label=f"{label}:test"),
        valid=Qrels(parts["valid"], label=f"{label}:valid"),
        excluded=Qrels(excluded, label=f"{label}:excluded"),
    )


def balance_and_split(qrels: Qrels, spec: SplitSpec = SplitSpec()) -> SplitResult:
    balanced, removed = balance_qrels(qrels, spec.relevance_threshold, spec.seed)
    result = split(balanced, spec)
    result.removed_count = removed
    return result


def export_finetune(part: Qrels, topics: Mapping[str, Topic] | Iterable[Topic],
                    passages: PassageStore, mode: PromptMode | str = PromptMode.ZERO_SHOT,
                    exemplar_qrels: Qrels | None = None, seed: int | None = None) -> list[dict]:
    """Instruction records ``{input: prompt, target: "<grade>"}`` in key order."""
    mode = PromptMode(mode)
    index = topics if isinstance(topics, Mapping) else {t.topic_id: t for t in topics}
    if mode is PromptMode.TWO_SHOT and (exemplar_qrels is None or seed is None):
        raise ValueError("two-shot export needs exemplar qrels and a seed")
    records = []
    for key, grade in part.items():
        topic = index.get(key.topic_id)
        if topic is None:
            raise KeyError(f"unknown topic {key.topic_id!r}")
        exemplars: tuple[Exemplar, Exemplar] | None = None
        if mode is PromptMode.TWO_SHOT:
            exemplars = sample_exemplars(exemplar_qrels, passages, key, seed)
        records.append({"input": build_prompt(topic, passages[key.doc_id], mode, exemplars),
                        "target": str(int(grade))})
    return records


def write_records(records: Iterable[dict], stream) -> None:
    for rec in records:
        stream.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
