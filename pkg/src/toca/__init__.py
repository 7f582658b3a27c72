"""Network connection-activation toolkit.

Given a network whose links are bundles of individually switchable
connections, find how few connections must stay active so that every
traffic matrix the full network could route, scaled by a retention ratio,
remains routable.
"""

from .errors import (
    InternalError,
    ModelError,
    OracleSizeError,
    ParseError,
    SolverError,
    TocaError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "InternalError",
    "ModelError",
    "OracleSizeError",
    "ParseError",
    "SolverError",
    "TocaError",
    "UsageError",
    "__version__",
]
