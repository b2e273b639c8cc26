"""
Error types raised by the continuity-scaling library.

All errors derive from ValueError so callers that only guard against bad
input keep working.
"""

from typing import Optional


class ContinuityScalingError(ValueError):
    """Base class for every library error."""


class InputSizeError(ContinuityScalingError):
    """Input too short (or a count too large) for the requested operation."""


class NonFiniteError(ContinuityScalingError):
    """A series contains NaN or infinite samples."""


class DegenerateGeometryError(ContinuityScalingError):
    """Embedded points have zero spread (constant series)."""


class DegenerateDataError(ContinuityScalingError):
    """No time index has any neighbour, even at the largest radius."""


class DivergenceError(ContinuityScalingError):
    """A generator left its admissible state region."""

    def __init__(self, message: str, step: Optional[float] = None, node: Optional[int] = None):
        super().__init__(message)
        self.step = step
        self.node = node


class ParseError(ContinuityScalingError):
    """Malformed input file; carries the location of the problem."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[str] = None):
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        prefix = f"{':'.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.path = path
        self.line = line
        self.column = column


class UndefinedRocError(ContinuityScalingError):
    """ROC needs at least one positive and one negative pair."""


class PairError(ContinuityScalingError):
    """Failure while analysing one pair of series, labelled with both names."""

    def __init__(self, cause_label: str, effect_label: str, error: Exception):
        super().__init__(f"[{cause_label} -> {effect_label}] {type(error).__name__}: {error}")
        self.cause_label = cause_label
        self.effect_label = effect_label
        self.error = error


class UsageError(Exception):
    """Invalid command-line flags or flag combination."""
