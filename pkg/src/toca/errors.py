"""Exception types shared across the package."""


class TocaError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TocaError):
    """Malformed input text (graph, demand, or activation files)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(TocaError):
    """Input is well-formed but semantically invalid for the model."""


class UsageError(TocaError):
    """Operation called with arguments outside its contract."""


class SolverError(TocaError):
    """The LP/ILP backend failed or returned an unusable solution."""


class OracleSizeError(TocaError):
    """Brute-force enumeration refused: candidate space above the limit."""


class InternalError(TocaError):
    """Invariant that should hold by construction was violated."""
