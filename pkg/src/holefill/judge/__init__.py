"""Automatic relevance judging."""

from .backends import (Backend, ChatBackend, ChatConfig, ConstantBackend, MockBackend,
                       OracleBackend, SamplingParams)
from .batch import BatchFailed, BatchResult, JudgeConfig, JudgeFailure, judge_batch
from .cache import JudgeRecord, JudgmentCache
from .errors import (BackendError, ExemplarError, JudgeError, OracleMiss, ResolutionError,
                     UnparseableResponse)
from .prompts import (CANONICAL_SCORE, CLOSING, INSTRUCTION, SCORE_GLOSSES, Exemplar, PromptMode,
                      build_prompt, parse_score, prompt_hash, sample_exemplars)

__all__ = [
    "Backend", "ChatBackend", "ChatConfig", "ConstantBackend", "MockBackend", "OracleBackend",
    "SamplingParams", "BatchFailed", "BatchResult", "JudgeConfig", "JudgeFailure", "judge_batch",
    "JudgeRecord", "JudgmentCache", "BackendError", "ExemplarError", "JudgeError", "OracleMiss",
    "ResolutionError", "UnparseableResponse", "CANONICAL_SCORE", "CLOSING", "INSTRUCTION",
    "SCORE_GLOSSES", "Exemplar", "PromptMode", "build_prompt", "parse_score", "prompt_hash", "sample_exemplars",
]
