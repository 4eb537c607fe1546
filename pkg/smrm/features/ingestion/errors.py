from typing import Sequence

from smrm.core.errors import IngestionError, InvalidInputError


def unparseable_cell_error(row: int, column: str, cell: str) -> IngestionError:
    """Return an error for a cell that is neither a number nor the missing token."""
    return IngestionError(
        f"Cannot parse {cell!r} in column {column} at data row {row} "
        f"(file line {row + 2})",
        {"row": row, "line": row + 2, "column": column, "cell": cell},
    )


def missing_predictor_error(row: int, column: str) -> IngestionError:
    """Return an error for a missing value in a predictor column."""
    return IngestionError(
        f"Predictor {column} is missing at data row {row} (file line {row + 2}); "
        "predictors must be complete",
        {"row": row, "line": row + 2, "column": column},
    )


def unknown_columns_error(
    columns: Sequence[str], available: Sequence[str]
) -> IngestionError:
    """Return an error for declared columns absent from the header."""
    return IngestionError(
        f"Columns not found in header: {', '.join(columns)}",
        {"columns": list(columns), "available": list(available)},
    )


def overlapping_columns_error(columns: Sequence[str]) -> InvalidInputError:
    """Return an error for columns declared both as predictor and response."""
    return InvalidInputError(
        f"Columns declared as both predictor and response: {', '.join(columns)}",
        {"columns": list(columns)},
    )


def mask_retries_error(rate: float, attempts: int) -> InvalidInputError:
    """Return an error for a missingness draw that keeps emptying a column."""
    return InvalidInputError(
        f"Missingness rate {rate} left a response column fully missing in "
        f"{attempts} draws",
        {"rate": rate, "attempts": attempts},
    )
