class JudgeError(Exception):
    """Base class for automatic-judging failures."""


class UnparseableResponse(JudgeError):
    def __init__(self, response: str | None):
        self.response = response
        response = response or ""
        snippet = response if len(response) <= 80 else response[:77] + "..."
        super().__init__(f"no integer score in 0..4 in response {snippet!r}")


class ExemplarError(JudgeError):
    """Prompt prerequisites (canonical response, two-shot exemplars) not met."""


class BackendError(JudgeError):
    """The backend could not produce a response (after retries, if any)."""


class OracleMiss(BackendError):
    pass


class ResolutionError(JudgeError):
    """A judgment key has no topic or passage text."""
