from typing import Sequence

from smrm.core.errors import InvalidInputError, PerfectFitError, SplitError


def split_failed_error(
    n: int, n_train: int, attempts: int, columns: Sequence[str]
) -> SplitError:
    """Return an error for a split that keeps leaving a training column empty."""
    return SplitError(
        f"No train/test split of {n} rows ({n_train} train) kept every response "
        f"observed in training after {attempts} attempts; last fully missing: "
        f"{', '.join(columns)}",
        {"n": n, "n_train": n_train, "attempts": attempts, "columns": list(columns)},
    )


def perfect_fit_error(response: str, lam: float) -> PerfectFitError:
    """Return an error for a response whose training MSE is zero."""
    return PerfectFitError(
        f"Lasso fit of response {response} at lambda={lam:.6g} has zero training "
        "MSE; its variance adjustment is undefined",
        {"response": response, "lambda": lam},
    )


def nonpositive_entry_error(row: int, column: str, value: float) -> InvalidInputError:
    """Return an error for an observed response that cannot be log-transformed."""
    return InvalidInputError(
        f"Observed response {column} at row {row} is {value!r}; "
        "log scale needs strictly positive values",
        {"row": row, "column": column, "value": value},
    )


def too_few_observations_error(
    response: str, observed: int, needed: int
) -> InvalidInputError:
    """Return an error for a response with too few observed training rows."""
    return InvalidInputError(
        f"Response {response} has {observed} observed training rows, "
        f"needs at least {needed}",
        {"response": response, "observed": observed, "needed": needed},
    )
