"""
errors.py — Exception hierarchy for the extremes toolkit.

Every error is a ValueError so callers that only care about "bad input or
bad numerics" can catch one type. Pipeline nodes catch these per cell and
record them on the cell instead of aborting the batch.
"""

from __future__ import annotations

from typing import Optional


class ExtremesError(ValueError):
    """Base class for all toolkit errors."""


class OrbitDivergenceError(ExtremesError):
    """An orbit produced a non-finite point (escape from the basin)."""

    def __init__(self, step_index: int, system: str = "") -> None:
        self.step_index = step_index
        self.system = system
        where = f" of {system}" if system else ""
        super().__init__(f"orbit{where} diverged at step {step_index}")


class InvalidPartitionError(ExtremesError):
    """Block count incompatible with the series length."""


class DegenerateSampleError(ExtremesError):
    """Sample has zero L-scale (all values equal)."""


class DomainError(ExtremesError):
    """Argument outside the mathematical domain of an operation."""


class FitError(ExtremesError):
    """A candidate distribution could not be fitted to the sample."""


class UndefinedEstimatorError(ExtremesError):
    """A dimension estimator is undefined for the given input."""


class InsufficientRowsError(ExtremesError):
    """Too few admissible rows for a scaling fit."""


class ModelSelectionError(ExtremesError):
    """No candidate family could be fitted."""


class ConfigError(ExtremesError):
    """Invalid experiment configuration, tied to a key and a line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None) -> None:
        self.key = key
        self.line = line
        prefix = ""
        if key is not None:
            prefix = f"key '{key}'"
            if line is not None:
                prefix += f" (line {line})"
            prefix += ": "
        super().__init__(prefix + message)
