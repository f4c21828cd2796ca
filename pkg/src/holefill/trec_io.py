"""Parsers and writers for TREC run files, qrels, topics and passage stores.

All parsers accept either the full text of a file or any iterable of lines
(an open file works). Fatal problems raise :class:`ParseError` carrying a
1-based line number; warnings are appended to the optional ``diagnostics``
list and logged.
"""

from __future__ import annotations

import enum
import json
import logging
import os
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import IO, Any, Union

from .collection import DataError, Grade, JudgmentKey, PassageStore, Qrels, Run, Topic

logger = logging.getLogger(__name__)

TextSource = Union[str, Iterable[str]]
PathLike = Union[str, "os.PathLike[str]"]


class Severity(str, enum.Enum):
    WARNING = "warning"
    FATAL = "fatal"


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    message: str
    severity: Severity = Severity.WARNING

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "document"
        return f"{where}: {self.severity.value}: {self.message}"


class ParseError(DataError):
    def __init__(self, diagnostic: ParseDiagnostic, source: str | None = None):
        self.diagnostic = diagnostic
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{diagnostic}")

    @property
    def line(self) -> int:
        return self.diagnostic.line


def _lines(stream: TextSource) -> Iterator[tuple[int, str]]:
    if isinstance(stream, str):
        stream = stream.splitlines()
    for lineno, line in enumerate(stream, 1):
        yield lineno, line.rstrip("\r\n")


def _fatal(line: int, message: str) -> ParseError:
    return ParseError(ParseDiagnostic(line, message, Severity.FATAL))


def _warn(diagnostics: list[ParseDiagnostic] | None, line: int, message: str) -> None:
    diag = ParseDiagnostic(line, message, Severity.WARNING)
    logger.warning("%s", diag)
    if diagnostics is not None:
        diagnostics.append(diag)


# --------------------------------------------------------------------------- runs

def parse_run(stream: TextSource, diagnostics: list[ParseDiagnostic] | None = None) -> Run:
    per_topic: dict[str, dict[str, float]] = {}
    tag: str | None = None
    for lineno, line in _lines(stream):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise _fatal(lineno, f"expected 6 fields (topic Q0 doc rank score tag), got {len(fields)}")
        topic_id, _q0, doc_id, rank, score_text, line_tag = fields
        try:
            score = float(score_text)
        except ValueError:
            raise _fatal(lineno, f"non-numeric score {score_text!r}") from None
        if score != score:
            raise _fatal(lineno, "score is NaN")
        if not rank.lstrip("-").isdigit():
            _warn(diagnostics, lineno, f"non-integer rank {rank!r} ignored")
        if tag is None:
            tag = line_tag
        elif line_tag != tag:
            raise _fatal(lineno, f"inconsistent run tag {line_tag!r} (file started with {tag!r})")
        docs = per_topic.setdefault(topic_id, {})
        if doc_id in docs:
            raise _fatal(lineno, f"duplicate docId {doc_id!r} for topic {topic_id!r}")
        docs[doc_id] = score
    if tag is None:
        raise _fatal(0, "run file has no entries")
    try:
        return Run(tag, {t: list(d.items()) for t, d in per_topic.items()})
    except DataError as exc:
        raise _fatal(0, str(exc)) from None


def write_run(run: Run, stream: IO[str]) -> None:
    for topic_id in run.topics():
        for entry in run.entries(topic_id):
            stream.write(f"{topic_id} Q0 {entry.doc_id} {entry.rank} {entry.score!r} {run.tag}\n")


def read_run(path: PathLike, diagnostics: list[ParseDiagnostic] | None = None) -> Run:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_run(fh, diagnostics)
        except ParseError as exc:
            raise ParseError(exc.diagnostic, source=str(path)) from None


def read_runs(directory: PathLike) -> list[Run]:
    """Every regular, non-hidden file in ``directory`` parsed as one run, sorted by tag."""
    runs = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if name.startswith(".") or not os.path.isfile(path):
            continue
        runs.append(read_run(path))
    tags = [r.tag for r in runs]
    dupes = sorted({t for t in tags if tags.count(t) > 1})
    if dupes:
        raise DataError(f"duplicate run tags in {directory}: {', '.join(dupes)}")
    return sorted(runs, key=lambda r: r.tag)


# -------------------------------------------------------------------------- qrels

def parse_qrels(stream: TextSource, diagnostics: list[ParseDiagnostic] | None = None,
                label: str = "") -> Qrels:
    entries: dict[JudgmentKey, Grade] = {}
    for lineno, line in _lines(stream):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise _fatal(lineno, f"expected 4 fields (topic 0 doc grade), got {len(fields)}")
        topic_id, _iteration, doc_id, grade_text = fields
        try:
            grade = Grade.of(grade_text)
            key = JudgmentKey(topic_id, doc_id)
        except DataError as exc:
            raise _fatal(lineno, str(exc)) from None
        if key in entries:
            if entries[key] != grade:
                raise _fatal(lineno, f"conflicting grade {grade} for {key} (earlier {entries[key]})")
            _warn(diagnostics, lineno, f"duplicate judgment for {key}")
            continue
        entries[key] = grade
    return Qrels(entries, label=label)


def write_qrels(qrels: Qrels, stream: IO[str]) -> None:
    for key, grade in qrels.items():
        stream.write(f"{key.topic_id} 0 {key.doc_id} {int(grade)}\n")


def read_qrels(path: PathLike, diagnostics: list[ParseDiagnostic] | None = None,
               label: str | None = None) -> Qrels:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_qrels(fh, diagnostics, label=str(path) if label is None else label)
        except ParseError as exc:
            raise ParseError(exc.diagnostic, source=str(path)) from None


def save_qrels(qrels: Qrels, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_qrels(qrels, fh)


# ------------------------------------------------------------------------- topics

def _load_json(stream: TextSource | Any) -> Any:
    if isinstance(stream, (list, dict)):
        return stream
    text = stream if isinstance(stream, str) else "".join(stream)
    if not text.strip():
        return []
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fatal(exc.lineno, f"invalid JSON: {exc.msg}") from None


def _join_response(value: Any) -> tuple[str | None, bool]:
    if value is None:
        return None, False
    if isinstance(value, str):
        return value, False
    if isinstance(value, list):
        parts = [p["text"] if isinstance(p, dict) else str(p) for p in value]
        return "\n\n".join(parts), True
    raise DataError(f"unsupported response type {type(value).__name__}")


def parse_topics(stream: TextSource | list, diagnostics: list[ParseDiagnostic] | None = None
                 ) -> list[Topic]:
    """Parse the normalized topics format into one :class:`Topic` per turn.

    The document is a JSON list of conversations::

        [{"number": "9-1", "ptkb": ["I am vegan", ...],
          "turns": [{"turn_id": 1, "utterance": "...", "response": "..."}]}]

    ``topicId`` is ``number-turn_id`` unless ``turn_id`` already starts with
    ``number-``. List-valued responses are joined with blank lines and the
    resulting topic has ``response_joined`` set.
    """
    data = _load_json(stream)
    if isinstance(data, dict) and "conversations" in data:
        data = data["conversations"]
    if not isinstance(data, list):
        raise _fatal(0, "topics document must be a list of conversations")
    topics: list[Topic] = []
    seen: set[str] = set()
    for conv in data:
        number = str(conv.get("number", "")).strip()
        if not number:
            raise _fatal(0, "conversation without 'number'")
        ptkb = conv.get("ptkb") or []
        if isinstance(ptkb, Mapping):
            raise _fatal(0, f"conversation {number}: ptkb must be a list (use from_ikat for the iKAT layout)")
        ptkb = tuple(str(s) for s in ptkb)
        for turn in conv.get("turns", []):
            turn_id = str(turn.get("turn_id", "")).strip()
            if not turn_id:
                raise _fatal(0, f"conversation {number}: turn without turn_id")
            topic_id = turn_id if turn_id.startswith(number + "-") else f"{number}-{turn_id}"
            utterance = turn.get("utterance")
            if not utterance:
                raise _fatal(0, f"topic {topic_id}: missing utterance")
            try:
                response, joined = _join_response(turn.get("response"))
            except DataError as exc:
                raise _fatal(0, f"topic {topic_id}: {exc}") from None
            if response is None:
                _warn(diagnostics, 0, f"topic {topic_id}: no canonical response")
            elif joined:
                _warn(diagnostics, 0, f"topic {topic_id}: list-valued response joined with blank lines")
            if topic_id in seen:
                raise _fatal(0, f"duplicate topic {topic_id}")
            seen.add(topic_id)
            try:
                topics.append(Topic(topic_id, utterance, ptkb, response, joined))
            except DataError as exc:
                raise _fatal(0, str(exc)) from None
    return topics


def from_ikat(data: TextSource | list) -> list[dict]:
    """Map the iKAT distribution layout onto the normalized topics format.

    iKAT stores ptkb as a dict keyed "1", "2", ...; statements are ordered by
    that key. ``resolved_utterance`` is ignored.
    """
    data = _load_json(data)
    out = []
    for conv in data:
        ptkb = conv.get("ptkb") or {}
        if isinstance(ptkb, Mapping):
            def order(k: str) -> tuple[int, int | str]:
                return (0, int(k)) if str(k).isdigit() else (1, str(k))
            ptkb = [ptkb[k] for k in sorted(ptkb, key=order)]
        turns = [{"turn_id": t["turn_id"], "utterance": t.get("utterance"),
                  **({"response": t["response"]} if t.get("response") is not None else {})}
                 for t in conv.get("turns", [])]
        out.append({"number": str(conv["number"]), "ptkb": list(ptkb), "turns": turns})
    return out


def read_topics(path: PathLike, diagnostics: list[ParseDiagnostic] | None = None,
                ikat: bool = False) -> list[Topic]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_topics(from_ikat(text) if ikat else text, diagnostics)
    except ParseError as exc:
        raise ParseError(exc.diagnostic, source=str(path)) from None


# ----------------------------------------------------------------------- passages

def parse_passages(stream: TextSource) -> PassageStore:
    texts: dict[str, str] = {}
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        if line.lstrip().startswith("{"):
            try:
                record = json.loads(line)
                doc_id, text = str(record["id"]), record["contents"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise _fatal(lineno, f"bad passage record: {exc}") from None
        else:
            doc_id, sep, text = line.partition("\t")
            if not sep:
                raise _fatal(lineno, "expected docId<TAB>text")
        if not doc_id or any(c.isspace() for c in doc_id):
            raise _fatal(lineno, f"invalid docId {doc_id!r}")
        if doc_id in texts and texts[doc_id] != text:
            raise _fatal(lineno, f"docId {doc_id!r} listed twice with different text")
        texts[doc_id] = text
    return PassageStore(texts)


def load_passages(path: PathLike) -> PassageStore:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_passages(fh)
        except ParseError as exc:
            raise ParseError(exc.diagnostic, source=str(path)) from None


def write_passages(store: PassageStore, stream: IO[str]) -> None:
    for doc_id in sorted(store.texts):
        stream.write(json.dumps({"id": doc_id, "contents": store.texts[doc_id]},
                                ensure_ascii=False) + "\n")
