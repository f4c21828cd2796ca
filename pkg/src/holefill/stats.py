"""Agreement and rank-correlation statistics."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable

import numpy as np

from .collection import DEFAULT_THRESHOLD, GRADES


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix; rows are the model's labels, columns the human's."""

    labels: tuple
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64)
        n = len(self.labels)
        if counts.shape != (n, n):
            raise StatsError(f"counts must be {n}x{n}, got {counts.shape}")
        if (counts < 0).any():
            raise StatsError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> list[int]:
        return [int(x) for x in self.counts.sum(axis=1)]

    def col_sums(self) -> list[int]:
        return [int(x) for x in self.counts.sum(axis=0)]

    def transpose(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.labels, self.counts.T)

    def collapse(self, threshold: int = DEFAULT_THRESHOLD) -> "ConfusionMatrix":
        """Binary matrix (labels 0, 1) with label >= threshold mapped to 1."""
        groups = np.array([1 if lab >= threshold else 0 for lab in self.labels])
        out = np.zeros((2, 2), dtype=np.int64)
        for i in range(2):
            for j in range(2):
                out[i, j] = self.counts[np.ix_(groups == i, groups == j)].sum()
        return ConfusionMatrix((0, 1), out)

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion(pred: Sequence, gold: Sequence, labels: Sequence = GRADES) -> ConfusionMatrix:
    if len(pred) != len(gold):
        raise StatsError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold labels")
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, g in zip(pred, gold):
        if p not in index or g not in index:
            raise StatsError(f"label pair ({p!r}, {g!r}) not in {list(labels)}")
        counts[index[p], index[g]] += 1
    return ConfusionMatrix(tuple(labels), counts)


def cohen_kappa(matrix: ConfusionMatrix | Sequence[Sequence[int]]) -> float:
    """Unweighted Cohen's kappa: (p_o - p_e) / (1 - p_e)."""
    counts = np.asarray(matrix.counts if isinstance(matrix, ConfusionMatrix) else matrix,
                        dtype=np.int64)
    total = int(counts.sum())
    if total <= 0:
        raise StatsError("kappa of an empty confusion matrix")
    # integer arithmetic keeps the p_e == 1 test exact
    agree = int(np.trace(counts))
    chance = int(np.dot(counts.sum(axis=1), counts.sum(axis=0)))
    if chance == total * total:
        if agree == total:
            return 1.0
        raise StatsError("kappa undefined: expected agreement is 1 but observed is not")
    p_o = agree / total
    p_e = chance / (total * total)
    return (p_o - p_e) / (1 - p_e)


class RankedSystems:
    """Systems sorted by score descending, ties broken by tag ascending."""

    def __init__(self, scores: Mapping[str, float] | Sequence[tuple[str, float]]):
        items = list(scores.items()) if isinstance(scores, Mapping) else list(scores)
        tags = [t for t, _ in items]
        if len(set(tags)) != len(tags):
            raise StatsError("system tags must be unique")
        self.items: tuple[tuple[str, float], ...] = tuple(
            sorted(((t, float(s)) for t, s in items), key=lambda ts: (-ts[1], ts[0])))
        self.scores: dict[str, float] = dict(self.items)

    @property
    def tags(self) -> list[str]:
        return [t for t, _ in self.items]

    def position(self, tag: str) -> int:
        """1-based rank of ``tag`` in this ordering."""
        return self.tags.index(tag) + 1

    def top(self, k: int) -> "RankedSystems":
        return RankedSystems(self.items[:k])

    def restrict(self, tags) -> "RankedSystems":
        wanted = set(tags)
        return RankedSystems([(t, s) for t, s in self.items if t in wanted])

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __repr__(self) -> str:
        return f"RankedSystems({list(self.items)!r})"


def _aligned(a: RankedSystems, b: RankedSystems) -> tuple[list[float], list[float]]:
    if set(a.scores) != set(b.scores):
        raise StatsError("rankings cover different system tags")
    if len(a) < 2:
        raise StatsError("need at least 2 systems")
    tags = sorted(a.scores)
    return [a.scores[t] for t in tags], [b.scores[t] for t in tags]


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def kendall_tau(a: RankedSystems, b: RankedSystems) -> float:
    """Kendall's tau-b between the score-induced orderings."""
    xs, ys = _aligned(a, b)
    n0 = len(xs) * (len(xs) - 1) // 2
    concordant = discordant = ties_a = ties_b = 0
    for i, j in combinations(range(len(xs)), 2):
        dx, dy = _sign(xs[i] - xs[j]), _sign(ys[i] - ys[j])
        if dx == 0:
            ties_a += 1
        if dy == 0:
            ties_b += 1
        if dx and dy:
            if dx == dy:
                concordant += 1
            else:
                discordant += 1
    denom = (n0 - ties_a) * (n0 - ties_b)
    if denom == 0:
        raise StatsError("tau-b undefined: one ordering is entirely tied")
    return (concordant - discordant) / math.sqrt(denom)


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks (ascending) with tied values sharing their mean rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_rho(a: RankedSystems, b: RankedSystems) -> float:
    xs, ys = _aligned(a, b)
    rx, ry = np.array(average_ranks(xs)), np.array(average_ranks(ys))
    rx -= rx.mean()
    ry -= ry.mean()
    sx, sy = float(np.dot(rx, rx)), float(np.dot(ry, ry))
    if sx == 0 or sy == 0:
        raise StatsError("spearman undefined: zero variance in a rank vector")
    return float(np.dot(rx, ry)) / math.sqrt(sx * sy)


def rbo_ext(a: Sequence[Hashable], b: Sequence[Hashable], p: float = 0.9) -> float:
    """Extrapolated rank-biased overlap, with the uneven-length extension."""
    if not 0 < p < 1:
        raise StatsError(f"p must be in (0, 1), got {p}")
    for lst in (a, b):
        if len(set(lst)) != len(lst):
            raise StatsError("rankings must not contain duplicates")
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    s, l = len(short), len(long_)
    if s == 0:
        return 0.0
    seen_short: set = set()
    seen_long: set = set()
    overlap = [0] * (l + 1)
    for d in range(1, l + 1):
        x = long_[d - 1]
        y = short[d - 1] if d <= s else None
        gained = 0
        seen_long.add(x)
        if x in seen_short:
            gained += 1
        if y is not None:
            seen_short.add(y)
            if y in seen_long:
                gained += 1
        overlap[d] = overlap[d - 1] + gained
    sum_seen = sum(overlap[d] / d * p ** d for d in range(1, l + 1))
    sum_tail = sum(overlap[s] * (d - s) / (s * d) * p ** d for d in range(s + 1, l + 1))
    extrapolated = ((overlap[l] - overlap[s]) / l + overlap[s] / s) * p ** l
    return (1 - p) / p * (sum_seen + sum_tail) + extrapolated
