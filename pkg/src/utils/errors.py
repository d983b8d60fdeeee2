"""
Exception hierarchy for the inference toolkit.

Every failure the library reports derives from InferenceError so the CLI
can map it to an exit code in one place.
"""

from typing import Optional


class InferenceError(Exception):
    """Base class for all library errors."""


class InvalidProblem(InferenceError, ValueError):
    """A problem or coefficient bundle violates its invariants."""


class DimensionMismatch(InvalidProblem):
    """Array shapes do not conform."""


class DimensionGuard(InferenceError):
    """A desk-scale enumeration was asked to run on a problem that is too large."""


class SingularMatrix(InferenceError):
    """A pivot fell below the singularity threshold."""


class NotPositiveDefinite(InferenceError):
    """Cholesky factorization failed even after the ridge."""


class InfeasibleProgram(InferenceError):
    """The program has no feasible point."""


class UnboundedProgram(InferenceError):
    """The objective improves without bound along a feasible ray."""


class MaxIterations(InferenceError):
    """An iterative solver hit its iteration cap."""


class EmptyMoments(InferenceError):
    """No optimality condition involves an estimated coefficient."""


class PieceLimitExceeded(InferenceError):
    """Too many complementarity pairs to enumerate."""


class NoFeasiblePiece(InferenceError):
    """Every complementarity piece violates the deterministic constraints."""


class DomainError(InferenceError, ValueError):
    """An argument lies outside the function's domain."""


class TooFewRows(InferenceError):
    """Not enough observations for the requested estimator."""


class GridTooLarge(InferenceError):
    """The requested grid exceeds the point budget."""


class PreconditionError(InferenceError, ValueError):
    """A caller-side precondition does not hold."""


class EmptySet(InferenceError):
    """No grid point was accepted."""

    def __init__(self, message: str, min_statistic: float = float('inf')):
        super().__init__(message)
        self.min_statistic = min_statistic


class ParseError(InferenceError):
    """Malformed input file."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class EmptyPanel(InferenceError):
    """A return panel has no usable rows."""


class ConfigError(InferenceError):
    """Invalid problem configuration."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
