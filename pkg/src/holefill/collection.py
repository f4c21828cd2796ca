"""Core domain types: grades, judgment keys, qrels, runs, topics, passages."""

from __future__ import annotations

import enum
import math
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Union

_WHITESPACE = re.compile(r"\s")


class DataError(ValueError):
    """Input data violates a domain invariant."""


class PassageNotFound(DataError, KeyError):
    def __str__(self) -> str:
        return f"no passage text for docId {self.args[0]!r}"


class Grade(enum.IntEnum):
    """Graded relevance on the 0-4 scale."""

    FAILS = 0
    SLIGHTLY = 1
    MODERATELY = 2
    HIGHLY = 3
    FULLY = 4

    # render as the bare digit on every Python version
    __str__ = int.__repr__

    @classmethod
    def of(cls, value: object) -> "Grade":
        """Strict conversion: accepts ints (or Grade) in 0..4 and numeric strings like "3"."""
        if isinstance(value, Grade):
            return value
        if isinstance(value, str):
            text = value.strip()
            if not re.fullmatch(r"[+-]?\d+", text):
                raise DataError(f"grade {value!r} is not an integer")
            value = int(text)
        if isinstance(value, bool) or not isinstance(value, int):
            raise DataError(f"grade {value!r} is not an integer")
        try:
            return cls(value)
        except ValueError:
            raise DataError(f"grade {value} outside 0..4") from None


GRADES: tuple[Grade, ...] = tuple(Grade)
DEFAULT_THRESHOLD = 2


def binarize(grade: int, threshold: int = DEFAULT_THRESHOLD) -> bool:
    if not 0 <= threshold <= 4:
        raise ValueError(f"threshold must be in [0, 4], got {threshold}")
    return Grade.of(grade) >= threshold


@dataclass(frozen=True, order=True)
class JudgmentKey:
    topic_id: str
    doc_id: str

    def __post_init__(self) -> None:
        for name in ("topic_id", "doc_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise DataError(f"{name} must be a non-empty string, got {value!r}")
            if _WHITESPACE.search(value):
                raise DataError(f"{name} {value!r} contains whitespace")

    def __str__(self) -> str:
        return f"{self.topic_id}/{self.doc_id}"


KeyLike = Union[JudgmentKey, tuple]


def _as_key(key: KeyLike) -> JudgmentKey:
    return key if isinstance(key, JudgmentKey) else JudgmentKey(*key)


class Qrels(Mapping):
    """Immutable mapping ``JudgmentKey -> Grade``.

    Iteration is lexicographic by (topic_id, doc_id). ``label`` carries
    free-form provenance and does not take part in equality.
    """

    def __init__(self, entries: Mapping[KeyLike, int] | Iterable[tuple[KeyLike, int]] = (),
                 label: str = ""):
        items = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[JudgmentKey, Grade] = {}
        for key, grade in items:
            key = _as_key(key)
            grade = Grade.of(grade)
            if key in data and data[key] != grade:
                raise DataError(f"conflicting grades for {key}: {data[key]} vs {grade}")
            data[key] = grade
        self._entries = MappingProxyType(dict(sorted(data.items())))
        self.label = label
        self._by_topic: dict[str, dict[str, Grade]] | None = None

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]], label: str = "") -> "Qrels":
        return cls(((JudgmentKey(t, d), g) for t, d, g in triples), label=label)

    def __getitem__(self, key: KeyLike) -> Grade:
        return self._entries[_as_key(key)]

    def __contains__(self, key: object) -> bool:
        if isinstance(key, tuple):
            try:
                key = JudgmentKey(*key)
            except (TypeError, DataError):
                return False
        return key in self._entries

    def __iter__(self) -> Iterator[JudgmentKey]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"Qrels({len(self)} judgments, label={self.label!r})"

    __hash__ = None  # type: ignore[assignment]

    def _topic_index(self) -> dict[str, dict[str, Grade]]:
        if self._by_topic is None:
            index: dict[str, dict[str, Grade]] = {}
            for key, grade in self._entries.items():
                index.setdefault(key.topic_id, {})[key.doc_id] = grade
            self._by_topic = index
        return self._by_topic

    def topics(self) -> list[str]:
        return list(self._topic_index())

    def for_topic(self, topic_id: str) -> Mapping[str, Grade]:
        return MappingProxyType(self._topic_index().get(topic_id, {}))

    def restrict(self, keys: Iterable[KeyLike], label: str | None = None) -> "Qrels":
        wanted = {_as_key(k) for k in keys}
        return Qrels({k: g for k, g in self._entries.items() if k in wanted},
                     label=self.label if label is None else label)

    def without(self, keys: Iterable[KeyLike], label: str | None = None) -> "Qrels":
        drop = {_as_key(k) for k in keys}
        return Qrels({k: g for k, g in self._entries.items() if k not in drop},
                     label=self.label if label is None else label)

    def relabel(self, label: str) -> "Qrels":
        return Qrels(self._entries, label=label)


class MergePolicy(str, enum.Enum):
    BASE_WINS = "base-wins"
    FILL_WINS = "fill-wins"
    ERROR_ON_CONFLICT = "error-on-conflict"


def merge_qrels(base: Qrels, fill: Qrels,
                policy: MergePolicy | str = MergePolicy.ERROR_ON_CONFLICT) -> Qrels:
    policy = MergePolicy(policy)
    merged = dict(base.items())
    for key, grade in fill.items():
        if key in merged and merged[key] != grade:
            if policy is MergePolicy.ERROR_ON_CONFLICT:
                raise DataError(f"merge conflict at {key}: base={merged[key]} fill={grade}")
            if policy is MergePolicy.BASE_WINS:
                continue
        merged[key] = grade
    if base.label == fill.label:
        label = base.label
    else:
        label = f"merge[{policy.value}]({base.label or '?'} + {fill.label or '?'})"
    return Qrels(merged, label=label)


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise DataError(f"rank must be >= 1, got {self.rank}")


class Run:
    """A system's ranked output, normalized on construction.

    Within each topic entries are ordered by score descending with ties
    broken by docId descending (trec_eval's convention); ranks are then
    reassigned 1..n. Input ranks are ignored.
    """

    def __init__(self, tag: str, per_topic: Mapping[str, Iterable[RunEntry | tuple[str, float]]]):
        if not tag or _WHITESPACE.search(tag):
            raise DataError(f"invalid run tag {tag!r}")
        self.tag = tag
        normalized: dict[str, tuple[RunEntry, ...]] = {}
        for topic_id in sorted(per_topic):
            pairs = []
            seen: set[str] = set()
            for item in per_topic[topic_id]:
                doc_id, score = (item.doc_id, item.score) if isinstance(item, RunEntry) else item
                JudgmentKey(topic_id, doc_id)  # validates both ids
                if doc_id in seen:
                    raise DataError(f"run {tag}: duplicate docId {doc_id!r} in topic {topic_id!r}")
                seen.add(doc_id)
                score = float(score)
                if math.isnan(score):
                    raise DataError(f"run {tag}: NaN score for {doc_id!r} in topic {topic_id!r}")
                pairs.append((score, doc_id))
            pairs.sort(reverse=True)
            if pairs:
                normalized[topic_id] = tuple(
                    RunEntry(doc_id, score, rank) for rank, (score, doc_id) in enumerate(pairs, 1))
        self._per_topic = MappingProxyType(normalized)

    @property
    def per_topic(self) -> Mapping[str, tuple[RunEntry, ...]]:
        return self._per_topic

    def topics(self) -> list[str]:
        return list(self._per_topic)

    def entries(self, topic_id: str) -> tuple[RunEntry, ...]:
        return self._per_topic.get(topic_id, ())

    def ranking(self, topic_id: str, depth: int | None = None) -> list[str]:
        entries = self.entries(topic_id)
        if depth is not None:
            entries = entries[:depth]
        return [e.doc_id for e in entries]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Run):
            return NotImplemented
        return self.tag == other.tag and dict(self._per_topic) == dict(other._per_topic)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Run({self.tag!r}, {len(self._per_topic)} topics)"


@dataclass(frozen=True)
class Topic:
    topic_id: str
    utterance: str
    ptkb: tuple[str, ...] = ()
    canonical_response: str | None = None
    # set when the canonical response was joined from a list of passages
    response_joined: bool = False

    def __post_init__(self) -> None:
        if not self.topic_id or _WHITESPACE.search(self.topic_id):
            raise DataError(f"invalid topicId {self.topic_id!r}")
        object.__setattr__(self, "ptkb", tuple(self.ptkb))


@dataclass(frozen=True)
class PassageStore:
    """docId -> passage text. Missing ids raise :class:`PassageNotFound`."""

    texts: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "texts", MappingProxyType(dict(self.texts)))

    def __getitem__(self, doc_id: str) -> str:
        try:
            return self.texts[doc_id]
        except KeyError:
            raise PassageNotFound(doc_id) from None

    def lookup(self, doc_id: str) -> str:
        return self[doc_id]

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.texts

    def __len__(self) -> int:
        return len(self.texts)
