"""Exception hierarchy shared by all homoglab modules."""
from typing import Any, Dict


class HomoglabError(Exception):
    """Base error carrying a stable error code and optional context."""

    exit_code = 1

    def __init__(self, code: str, message: str, **context: Any):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.context: Dict[str, Any] = context


class ConfigError(HomoglabError):
    """PARSE_ERROR and VALIDATION_ERROR raised while reading a config."""

    exit_code = 2


class PreconditionError(HomoglabError):
    """A geometric, ellipticity or growth precondition does not hold."""

    exit_code = 3


class SolverError(HomoglabError):
    """The iterative solver did not reach its tolerance.

    The best iterate and the solve report stay available on the exception so
    callers can decide whether to keep going.
    """

    exit_code = 4

    def __init__(self, code: str, message: str, solution=None, report=None, **context: Any):
        super().__init__(code, message, **context)
        self.solution = solution
        self.report = report
