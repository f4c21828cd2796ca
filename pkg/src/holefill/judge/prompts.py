"""Relevance-judgment prompt template and response parsing."""

from __future__ import annotations

import enum
import hashlib
import random
import re
from collections.abc import Sequence
from dataclasses import dataclass

from ..collection import DEFAULT_THRESHOLD, Grade, JudgmentKey, PassageStore, Qrels, Topic
from .errors import ExemplarError, UnparseableResponse

INSTRUCTION = (
    "Instruction: You are a search quality rater evaluating the relevance of web pages. "
    "Given the persona of the user, user query, and a web page, you must provide a score on an "
    "integer scale of 0 to 4 to indicate to what extent the given document meets the information "
    "needs of the user. The scores have the following meanings:"
)
SCORE_GLOSSES = (
    "0: fails to meet",
    "1: slightly meets",
    "2: moderately meets",
    "3: highly meets",
    "4: fully meets",
)
CLOSING = (
    "Please only generate an int score between 0 to 4 to say to what extent the document is "
    "relevant to the user question. Score lower than 2 means the document is not relevant."
)
CANONICAL_SCORE = Grade.FULLY


class PromptMode(str, enum.Enum):
    ZERO_SHOT = "zero_shot"
    ONE_SHOT = "one_shot"
    TWO_SHOT = "two_shot"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Exemplar:
    text: str
    grade: Grade
    doc_id: str | None = None


def _example_block(index: int, text: str, grade: int) -> str:
    return f"document {index}: {text}\nScore: {int(grade)}"


def build_prompt(topic: Topic, doc_text: str, mode: PromptMode | str = PromptMode.ZERO_SHOT,
                 exemplars: Sequence[Exemplar] | None = None) -> str:
    """Render the judging prompt for one (topic, document) pair.

    ``one_shot`` shows the topic's canonical response as a score-4 example.
    ``two_shot`` needs ``exemplars`` = (relevant, non-relevant), in that order.
    """
    mode = PromptMode(mode)
    persona = "User persona:" + "".join(f"\n{s}" for s in topic.ptkb)
    blocks = [
        INSTRUCTION,
        "\n".join(SCORE_GLOSSES),
        f"{persona}\nQuery: {topic.utterance}",
    ]
    if mode is PromptMode.ONE_SHOT:
        if not topic.canonical_response:
            raise ExemplarError(f"topic {topic.topic_id} has no canonical response for one-shot judging")
        blocks.append(_example_block(1, topic.canonical_response, CANONICAL_SCORE))
    elif mode is PromptMode.TWO_SHOT:
        if not exemplars or len(exemplars) != 2:
            raise ExemplarError("two-shot judging needs exactly two exemplars")
        relevant, nonrelevant = exemplars
        if relevant.grade < DEFAULT_THRESHOLD or nonrelevant.grade >= DEFAULT_THRESHOLD:
            raise ExemplarError(
                f"two-shot exemplars must be (grade >= {DEFAULT_THRESHOLD}, grade < {DEFAULT_THRESHOLD}),"
                f" got ({int(relevant.grade)}, {int(nonrelevant.grade)})")
        if not relevant.text or not nonrelevant.text:
            raise ExemplarError("two-shot exemplars need non-empty texts")
        blocks.append(_example_block(1, relevant.text, relevant.grade))
        blocks.append(_example_block(2, nonrelevant.text, nonrelevant.grade))
    blocks.append(f"document : {doc_text}\nScore:")
    blocks.append(CLOSING)
    return "\n\n".join(blocks)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def sample_exemplars(exemplar_qrels: Qrels, passages: PassageStore, key: JudgmentKey,
                     seed: int) -> tuple[Exemplar, Exemplar]:
    """Seeded draw of one relevant and one non-relevant judged doc from the key's topic.

    The draw depends only on (seed, key), so it does not change with batch
    order or parallelism. The target document itself is never an exemplar.
    """
    judged = exemplar_qrels.for_topic(key.topic_id)
    relevant = sorted(d for d, g in judged.items() if g >= DEFAULT_THRESHOLD and d != key.doc_id)
    nonrelevant = sorted(d for d, g in judged.items() if g < DEFAULT_THRESHOLD and d != key.doc_id)
    if not relevant or not nonrelevant:
        raise ExemplarError(f"topic {key.topic_id}: need a relevant and a non-relevant judged "
                            f"document for two-shot exemplars")
    rng = random.Random(f"{seed}|{key.topic_id}|{key.doc_id}")
    rel_doc, non_doc = rng.choice(relevant), rng.choice(nonrelevant)
    return (Exemplar(passages[rel_doc], judged[rel_doc], rel_doc),
            Exemplar(passages[non_doc], judged[non_doc], non_doc))


# integers not glued to letters, digits, a decimal point or a minus sign
_INT_TOKEN = re.compile(r"(?<![\w.\-])(\d+)(?![\w]|\.\d)")


def parse_score(response: str) -> Grade:
    """First standalone integer in 0..4 anywhere in ``response``."""
    for match in _INT_TOKEN.finditer(response or ""):
        value = int(match.group(1))
        if 0 <= value <= 4:
            return Grade(value)
    raise UnparseableResponse(response)
