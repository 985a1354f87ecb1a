"""Exception hierarchy with stable error codes.

Validation errors map to CLI exit code 2, computation errors to exit code 3.
Every exception carries a short machine-readable ``code`` plus optional
file/line context so the CLI can emit a structured error record.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all forest-link errors."""

    code = "error"
    exit_code = 3

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, byte: int | None = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.byte = byte

    def record(self) -> dict:
        rec = {"error": self.code, "message": str(self)}
        if self.path is not None:
            rec["path"] = self.path
        if self.line is not None:
            rec["line"] = self.line
        if self.byte is not None:
            rec["byte"] = self.byte
        return rec


class ValidationError(ToolkitError):
    """Bad inputs: malformed files, out-of-range values, wrong arity."""

    code = "validation"
    exit_code = 2


class DomainError(ValidationError):
    code = "domain"


class ArityError(ValidationError):
    code = "arity"


class ParseError(ValidationError):
    code = "parse"


class ConfigError(ValidationError):
    code = "config"


class DegenerateDataError(ValidationError):
    code = "degenerate"


class ComputationError(ToolkitError):
    """The inputs were well-formed but the computation cannot proceed."""

    code = "computation"
    exit_code = 3


class SyncError(ComputationError):
    code = "sync"


class NoSignalError(ComputationError):
    code = "no_signal"


class UndefinedStatisticError(ComputationError):
    code = "undefined_stat"


class InfeasibleTargetsError(ComputationError):
    code = "infeasible_targets"


class NotConvergedError(ComputationError):
    code = "not_converged"
