"""Seeded synthetic test collections for demos and tests."""

from __future__ import annotations

import os
import random
from collections.abc import Sequence
from dataclasses import dataclass

from .collection import JudgmentKey, PassageStore, Qrels, Run, Topic
from .pooling import build_pool


@dataclass
class Corpus:
    runs: list[Run]
    qrels: Qrels
    topics: list[Topic]
    passages: PassageStore

    def write(self, directory: str) -> dict[str, str]:
        """Materialize as files; returns the paths by role."""
        import json

        from .trec_io import save_qrels, write_passages, write_run

        runs_dir = os.path.join(directory, "runs")
        os.makedirs(runs_dir, exist_ok=True)
        for run in self.runs:
            with open(os.path.join(runs_dir, f"{run.tag}.txt"), "w", encoding="utf-8") as fh:
                write_run(run, fh)
        paths = {"runs": runs_dir, "qrels": os.path.join(directory, "qrels.txt"),
                 "topics": os.path.join(directory, "topics.json"),
                 "passages": os.path.join(directory, "passages.jsonl")}
        save_qrels(self.qrels, paths["qrels"])
        conversations: dict[str, dict] = {}
        for t in self.topics:
            number, turn = t.topic_id.rsplit("-", 1)
            conv = conversations.setdefault(number, {"number": number, "ptkb": list(t.ptkb), "turns": []})
            conv["turns"].append({"turn_id": turn, "utterance": t.utterance,
                                  **({"response": t.canonical_response} if t.canonical_response else {})})
        with open(paths["topics"], "w", encoding="utf-8") as fh:
            json.dump(list(conversations.values()), fh, indent=1)
        with open(paths["passages"], "w", encoding="utf-8") as fh:
            write_passages(self.passages, fh)
        return paths


def _topics_and_passages(topic_ids: Sequence[str], docs: dict[str, list[str]]):
    topics = []
    texts = {}
    for t in topic_ids:
        number = t.rsplit("-", 1)[0]
        topics.append(Topic(t, f"what should I know about subject {t}?",
                            (f"I live near site {number}.", f"I prefer short answers ({number})."),
                            f"canonical answer for {t}"))
        for d in docs[t]:
            texts[d] = f"passage {d} discussing subject {t}"
    return topics, PassageStore(texts)


def make_corpus(seed: int, n_runs: int = 8, n_topics: int = 20, docs_per_topic: int = 30,
                run_length: int = 20, pool_depth: int = 10,
                grade_weights: Sequence[float] = (0.6, 0.15, 0.12, 0.08, 0.05)) -> Corpus:
    """Runs of varying quality over per-topic document sets.

    Human qrels judge exactly the depth-``pool_depth`` pool, so the pool has
    no holes.
    """
    rng = random.Random(seed)
    topic_ids = [f"{c + 1}-{turn + 1}" for c in range((n_topics + 1) // 2) for turn in range(2)][:n_topics]
    docs = {t: [f"d{t}-{i:03d}" for i in range(docs_per_topic)] for t in topic_ids}
    truth = {t: {d: rng.choices(range(5), weights=grade_weights)[0] for d in docs[t]} for t in topic_ids}
    runs = []
    for r in range(n_runs):
        quality = rng.uniform(0.0, 1.5)
        per_topic = {}
        for t in topic_ids:
            picked = rng.sample(docs[t], run_length)
            per_topic[t] = [(d, round(quality * truth[t][d] + rng.gauss(0, 1), 6)) for d in picked]
        runs.append(Run(f"run{r:02d}", per_topic))
    pool = build_pool(runs, pool_depth)
    qrels = Qrels({k: truth[k.topic_id][k.doc_id] for k in pool.keys()}, label=f"synthetic-human(seed={seed})")
    topics, passages = _topics_and_passages(topic_ids, docs)
    return Corpus(runs, qrels, topics, passages)


def make_hole_corpus(seed: int, unique_counts: Sequence[int], n_topics: int = 20,
                     n_common: int = 10, depth: int = 10) -> Corpus:
    """Corpus where run i has exactly ``unique_counts[i]`` docs in its top ``depth`` per topic
    that no other run retrieves.

    Two extra baseline runs retrieve every common doc, so common docs always
    have at least two contributors. Unique docs are judged non-relevant or
    marginal (grade 0/1); common docs get mixed grades.
    """
    rng = random.Random(seed)
    topic_ids = [f"{c + 1}-1" for c in range(n_topics)]
    docs: dict[str, list[str]] = {}
    grades: dict[JudgmentKey, int] = {}
    per_run: dict[str, dict[str, list[tuple[str, float]]]] = {}
    tags = [f"base{b}" for b in range(2)] + [f"sys{i:02d}" for i in range(len(unique_counts))]
    for t in topic_ids:
        common = [f"c{t}-{j:02d}" for j in range(n_common)]
        docs[t] = list(common)
        for d in common:
            grades[JudgmentKey(t, d)] = rng.choices(range(5), weights=(0.3, 0.1, 0.3, 0.2, 0.1))[0]
        for b in range(2):
            per_run.setdefault(tags[b], {})[t] = [(d, rng.random()) for d in common]
        for i, u in enumerate(unique_counts):
            if not 0 <= u <= depth:
                raise ValueError(f"unique count {u} outside 0..{depth}")
            tag = tags[i + 2]
            uniq = [f"u{t}-{tag}-{j:02d}" for j in range(u)]
            docs[t] += uniq
            for d in uniq:
                grades[JudgmentKey(t, d)] = rng.choice((0, 0, 1))
            chosen = uniq + rng.sample(common, min(depth - u, n_common))
            per_run.setdefault(tag, {})[t] = [(d, rng.random()) for d in chosen]
    runs = [Run(tag, per_run[tag]) for tag in tags]
    topics, passages = _topics_and_passages(topic_ids, docs)
    return Corpus(runs, Qrels(grades, label=f"synthetic-holes(seed={seed})"), topics, passages)
