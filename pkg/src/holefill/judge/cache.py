"""Append-only judgment cache backed by a line-delimited JSON file."""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from ..collection import Grade, JudgmentKey
from .backends import SamplingParams
from .prompts import PromptMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JudgeRecord:
    key: JudgmentKey
    grade: Grade
    mode: PromptMode
    backend_id: str
    sampling: SamplingParams
    raw_response: str
    prompt_hash: str
    timestamp: str

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def to_dict(self) -> dict:
        return {
            "topicId": self.key.topic_id,
            "docId": self.key.doc_id,
            "grade": int(self.grade),
            "mode": self.mode.value,
            "backendId": self.backend_id,
            "temperature": self.sampling.temperature,
            "topP": self.sampling.top_p,
            "rawResponse": self.raw_response,
            "promptHash": self.prompt_hash,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JudgeRecord":
        return cls(
            key=JudgmentKey(d["topicId"], d["docId"]),
            grade=Grade.of(d["grade"]),
            mode=PromptMode(d["mode"]),
            backend_id=d["backendId"],
            sampling=SamplingParams(float(d["temperature"]), float(d["topP"])),
            raw_response=d["rawResponse"],
            prompt_hash=d["promptHash"],
            timestamp=d["timestamp"],
        )


CacheKey = tuple[str, str, float, float, str, str]


def cache_key(prompt_hash: str, backend_id: str, sampling: SamplingParams,
              key: JudgmentKey) -> CacheKey:
    return (prompt_hash, backend_id, sampling.temperature, sampling.top_p,
            key.topic_id, key.doc_id)


class JudgmentCache:
    """Thread-safe cache; with a ``path`` every new record is appended as one line.

    Each record is written with a single ``os.write`` on an ``O_APPEND``
    descriptor, so concurrent writers never interleave partial lines.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self._records: dict[CacheKey, JudgeRecord] = {}
        self._lock = threading.Lock()
        if path is not None and os.path.exists(path):
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = JudgeRecord.from_dict(json.loads(line))
                except (ValueError, KeyError) as exc:
                    logger.warning("%s:%d: skipping unreadable cache line (%s)", self.path, lineno, exc)
                    continue
                self._records.setdefault(cache_key(rec.prompt_hash, rec.backend_id, rec.sampling, rec.key), rec)

    def get(self, prompt_hash: str, backend_id: str, sampling: SamplingParams,
            key: JudgmentKey) -> JudgeRecord | None:
        with self._lock:
            return self._records.get(cache_key(prompt_hash, backend_id, sampling, key))

    def put(self, record: JudgeRecord) -> bool:
        """Store ``record``; returns False if an entry for its cache key already exists."""
        ck = cache_key(record.prompt_hash, record.backend_id, record.sampling, record.key)
        with self._lock:
            if ck in self._records:
                return False
            if self.path is not None:
                line = (json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n").encode()
                fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
                try:
                    os.write(fd, line)
                finally:
                    os.close(fd)
            self._records[ck] = record
            return True

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[JudgeRecord]:
        with self._lock:
            return list(self._records.values())
