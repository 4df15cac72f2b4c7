"""
Exception hierarchy for the factual package.

Every error raised on purpose by the package derives from FactualError so the
CLI can tell user errors (exit 1) from broken invariants (exit 2).
"""

from typing import Any, Dict, Optional, Sequence


class FactualError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class ShapeError(FactualError, ValueError):
    """Operand shapes are incompatible for an operation."""

    def __init__(self, op: str, left: Sequence[int], right: Sequence[int], reason: str = "shape mismatch"):
        super().__init__(
            f"{op}: {reason} between {tuple(left)} and {tuple(right)}",
            {"op": op, "left": tuple(left), "right": tuple(right)},
        )
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)


class UnsupportedOpError(FactualError, ValueError):
    """Requested operation kind is not registered."""


class NonDifferentiableError(FactualError):
    """A gradient was requested through a forward-only operation."""


class GraphConsumedError(FactualError):
    """Backward was called on a single-use graph that already ran."""


class NumericalError(FactualError, ArithmeticError):
    """Non-finite values were produced or encountered."""


class AttackError(FactualError):
    """An attack could not produce a perturbation."""


class DatasetFormatError(FactualError, ValueError):
    """A dataset file is malformed or holds invalid records."""


class CheckpointFormatError(FactualError, ValueError):
    """A checkpoint file is malformed or does not match its architecture."""


class ConfigError(FactualError, ValueError):
    """A configuration file or override could not be resolved."""


class InvariantViolation(FactualError, AssertionError):
    """An internal invariant does not hold."""
