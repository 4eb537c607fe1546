"""CSV ingestion and export of datasets with missing responses."""

from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from smrm.core.errors import IngestionError
from smrm.core.logging import logger
from smrm.features.core_types.schemas import Dataset, MaskedMatrix, SplitTag
from smrm.features.export.service import atomic_write_text
from smrm.features.ingestion.errors import (
    missing_predictor_error,
    overlapping_columns_error,
    unknown_columns_error,
    unparseable_cell_error,
)

DEFAULT_MISSING_TOKEN = "NA"


def _parse_cell(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise unparseable_cell_error(row, column, cell) from None
    if not np.isfinite(value):
        raise unparseable_cell_error(row, column, cell)
    return value


def _parse_columns(
    frame: pd.DataFrame, columns: Sequence[str], token: str, allow_missing: bool
) -> np.ndarray:
    """Parse cells into floats; the missing token becomes NaN."""
    values = np.empty((len(frame), len(columns)))
    for k, column in enumerate(columns):
        for row, raw in enumerate(frame[column].tolist()):
            cell = raw.strip()
            if cell == token:
                if not allow_missing:
                    raise missing_predictor_error(row, column)
                values[row, k] = np.nan
            else:
                values[row, k] = _parse_cell(cell, row, column)
    return values


def resolve_columns(
    header: Sequence[str],
    response_columns: Sequence[str],
    predictor_columns: Sequence[str] = (),
) -> Tuple[List[str], List[str]]:
    """Check declared names against the header.

    An empty predictor list selects every non-response column.

    Returns:
        (predictors, responses) in declaration order
    """
    responses = list(response_columns)
    if not responses:
        raise IngestionError("At least one response column must be declared")
    predictors = list(predictor_columns) or [c for c in header if c not in responses]
    unknown = [c for c in responses + predictors if c not in header]
    if unknown:
        raise unknown_columns_error(unknown, header)
    overlap = sorted(set(responses) & set(predictors))
    if overlap:
        raise overlapping_columns_error(overlap)
    if not predictors:
        raise IngestionError("No predictor columns left after selecting responses")
    return predictors, responses


def ingest_csv(
    path: Path,
    response_columns: Sequence[str],
    predictor_columns: Sequence[str] = (),
    missing_token: str = DEFAULT_MISSING_TOKEN,
) -> Dataset:
    """Read a UTF-8 CSV with a header row into a Dataset.

    Every cell is parsed with ``float`` (decimal point, scientific notation
    accepted). Cells equal to ``missing_token`` mark missing responses and
    are rejected in predictor columns.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"Input file not found: {path}", {"path": str(path)})
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestionError(f"Cannot read {path}: {e}", {"path": str(path)}) from e
    header = [str(c).strip() for c in frame.columns]
    frame.columns = header

    predictors, responses = resolve_columns(header, response_columns, predictor_columns)
    X = _parse_columns(frame, predictors, missing_token, allow_missing=False)
    Y = MaskedMatrix.from_nan(
        _parse_columns(frame, responses, missing_token, allow_missing=True),
        column_names=responses,
    ).validate_columns()
    dataset = Dataset(X=X, Y=Y, predictor_names=predictors)

    ratios = ", ".join(
        f"{name}={ratio:.3f}"
        for name, ratio in zip(Y.column_names, Y.missing_ratio_by_column())
    )
    logger.info(
        f"Ingested {path.name}: n={dataset.n}, p={dataset.p}, q={dataset.q}, "
        f"missing ratio {Y.missing_ratio():.3f}"
    )
    logger.debug(f"Per-response missing ratios: {ratios}")
    return dataset


def _format(value: float) -> str:
    return repr(float(value))


def dataset_frame(
    dataset: Dataset, missing_token: str = DEFAULT_MISSING_TOKEN
) -> pd.DataFrame:
    """String table of predictors then responses, missing cells as the token."""
    columns = {}
    for j, name in enumerate(dataset.predictor_names):
        columns[name] = [_format(v) for v in dataset.X[:, j]]
    for l, name in enumerate(dataset.response_names):
        columns[name] = [
            _format(v) if observed else missing_token
            for v, observed in zip(dataset.Y.values[:, l], dataset.Y.mask[:, l])
        ]
    return pd.DataFrame(columns)


def write_csv(
    dataset: Dataset, path: Path, missing_token: str = DEFAULT_MISSING_TOKEN
) -> Path:
    """Inverse of ``ingest_csv``: exact float round trips via ``repr``."""
    text = dataset_frame(dataset, missing_token).to_csv(index=False)
    return atomic_write_text(Path(path), text)


def missingness_summary(dataset: Dataset) -> pd.DataFrame:
    """Missing ratio per response over all rows and, when split, train/test.

    The last row, named ``total``, holds the ratios over all responses.
    """
    parts: List[Tuple[str, MaskedMatrix]] = [("all", dataset.Y)]
    if dataset.split is not None:
        for tag in (SplitTag.TRAIN, SplitTag.TEST):
            parts.append((tag.value, dataset.Y.take_rows(dataset.rows_tagged(tag))))

    table = pd.DataFrame({"response": list(dataset.response_names) + ["total"]})
    table["observed"] = list(dataset.Y.observed_counts()) + [
        int(dataset.Y.mask.sum())
    ]
    for label, Y in parts:
        table[f"missing_{label}"] = list(Y.missing_ratio_by_column()) + [
            Y.missing_ratio()
        ]
    return table

