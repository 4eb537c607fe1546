"""Structured errors shared by every feature package."""

from typing import Any, Dict, Optional


class SmrmError(Exception):
    """Base error carrying a machine-readable code and details."""

    code: str = "smrm_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details or {}

    def to_record(self) -> Dict[str, Any]:
        """Return a JSON-serialisable error record."""
        return {
            "error": self.code,
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }

    def __str__(self) -> str:
        return self.message


class InvalidInputError(SmrmError):
    code = "invalid_input"


class DimensionMismatchError(SmrmError):
    code = "dimension_mismatch"


class NotPositiveDefiniteError(SmrmError):
    code = "not_positive_definite"


class UnboundedProblemError(SmrmError):
    code = "unbounded_problem"


class ObjectiveIncreaseError(SmrmError):
    code = "objective_increase"


class PerfectFitError(SmrmError):
    code = "perfect_fit"


class SplitError(SmrmError):
    code = "split_failed"


class IngestionError(SmrmError):
    code = "ingestion_failed"
