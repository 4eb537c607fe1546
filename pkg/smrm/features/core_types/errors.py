from typing import Any, Sequence

from smrm.core.errors import (
    DimensionMismatchError,
    InvalidInputError,
    NotPositiveDefiniteError,
)


def dimension_mismatch_error(
    what: str, expected: Any, actual: Any
) -> DimensionMismatchError:
    """Return an error for inconsistent array shapes."""
    return DimensionMismatchError(
        f"{what}: expected {expected}, got {actual}",
        {"what": what, "expected": str(expected), "actual": str(actual)},
    )


def not_spd_error(name: str, reason: str) -> NotPositiveDefiniteError:
    """Return an error for a matrix that must be symmetric positive definite."""
    return NotPositiveDefiniteError(
        f"{name} is not symmetric positive definite: {reason}",
        {"matrix": name, "reason": reason},
    )


def non_finite_error(name: str) -> InvalidInputError:
    """Return an error for NaN or infinite entries."""
    return InvalidInputError(
        f"{name} contains non-finite entries", {"array": name}
    )


def fully_missing_columns_error(columns: Sequence[str]) -> InvalidInputError:
    """Return an error for response columns without a single observation."""
    return InvalidInputError(
        "Every response column needs at least one observed entry; "
        f"fully missing: {', '.join(columns)}",
        {"columns": list(columns), "rule": "no_fully_missing_column"},
    )
