"""Data types for masked responses, row partitions and model parameters."""

from enum import Enum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator

from smrm.core.errors import InvalidInputError
from smrm.features.core_types.errors import (
    dimension_mismatch_error,
    fully_missing_columns_error,
    non_finite_error,
)
from smrm.features.core_types.linalg import check_spd, spd_inverse


def frozen_array(value: ArrayLike, dtype: Any = float) -> np.ndarray:
    """Copy ``value`` into a read-only array."""
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


class SplitTag(str, Enum):
    """Row assignment of a dataset."""

    TRAIN = "train"
    TEST = "test"


class RowPartition(BaseModel):
    """Observed and missing column indices of one response row."""

    model_config = ConfigDict(frozen=True)

    obs_idx: Tuple[int, ...] = ()
    mis_idx: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_partition(self) -> "RowPartition":
        q = len(self.obs_idx) + len(self.mis_idx)
        if sorted(self.obs_idx + self.mis_idx) != list(range(q)):
            raise ValueError("obs_idx and mis_idx must partition 0..q-1")
        for name, idx in (("obs_idx", self.obs_idx), ("mis_idx", self.mis_idx)):
            if list(idx) != sorted(idx):
                raise ValueError(f"{name} must be ascending")
        return self

    @property
    def size(self) -> int:
        return len(self.obs_idx) + len(self.mis_idx)

    @property
    def obs(self) -> np.ndarray:
        return np.asarray(self.obs_idx, dtype=int)

    @property
    def mis(self) -> np.ndarray:
        return np.asarray(self.mis_idx, dtype=int)


class MaskedMatrix(BaseModel):
    """An n x q matrix with an explicit observation mask (True = observed).

    Entries under the mask are normalised to 0.0 so that no computation can
    depend on them.

    Construction does not require every column to have an observed entry:
    a held-out test view may leave a response fully unobserved. Training
    entry points call :meth:`validate_columns` to reject such matrices.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    mask: np.ndarray
    column_names: Tuple[str, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _normalise(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        values = np.array(data.get("values"), dtype=float)
        if values.ndim != 2:
            raise dimension_mismatch_error("values", "2-d matrix", values.shape)
        mask = np.array(data.get("mask"), dtype=bool)
        if mask.shape != values.shape:
            raise dimension_mismatch_error("mask shape", values.shape, mask.shape)
        if not np.all(np.isfinite(values[mask])):
            raise non_finite_error("observed values")
        names = data.get("column_names") or ()
        names = tuple(str(name) for name in names) or tuple(
            f"y{l + 1}" for l in range(values.shape[1])
        )
        if len(names) != values.shape[1]:
            raise dimension_mismatch_error(
                "column_names", values.shape[1], len(names)
            )
        return {
            "values": frozen_array(np.where(mask, values, 0.0)),
            "mask": frozen_array(mask, dtype=bool),
            "column_names": names,
        }

    @classmethod
    def from_nan(
        cls, values: ArrayLike, column_names: Optional[Sequence[str]] = None
    ) -> "MaskedMatrix":
        """Build from an array that marks missing entries with NaN."""
        array = np.asarray(values, dtype=float)
        return cls(
            values=np.nan_to_num(array, nan=0.0),
            mask=~np.isnan(array),
            column_names=tuple(column_names or ()),
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    @property
    def n_cols(self) -> int:
        return self.shape[1]

    @property
    def is_complete(self) -> bool:
        return bool(np.all(self.mask))

    def to_nan(self) -> np.ndarray:
        """Values with NaN at missing entries."""
        return np.where(self.mask, self.values, np.nan)

    def row_partition(self, i: int) -> RowPartition:
        """Partition of row ``i`` into observed and missing columns."""
        row = self.mask[i]
        return RowPartition(
            obs_idx=tuple(int(l) for l in np.flatnonzero(row)),
            mis_idx=tuple(int(l) for l in np.flatnonzero(~row)),
        )

    def observed_column(self, l: int) -> Tuple[np.ndarray, np.ndarray]:
        """Row indices and values of the observed entries of column ``l``."""
        rows = np.flatnonzero(self.mask[:, l])
        return rows, self.values[rows, l]

    def take_rows(self, rows: ArrayLike) -> "MaskedMatrix":
        idx = np.asarray(rows, dtype=int)
        return MaskedMatrix(
            values=self.values[idx],
            mask=self.mask[idx],
            column_names=self.column_names,
        )

    def with_values(self, values: ArrayLike) -> "MaskedMatrix":
        """Same mask and names, new values."""
        return MaskedMatrix(
            values=values, mask=self.mask, column_names=self.column_names
        )

    def observed_counts(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    def missing_ratio_by_column(self) -> np.ndarray:
        if self.n_rows == 0:
            return np.zeros(self.n_cols)
        return 1.0 - self.mask.mean(axis=0)

    def missing_ratio(self) -> float:
        if self.mask.size == 0:
            return 0.0
        return float(1.0 - self.mask.mean())

    def fully_missing_columns(self) -> List[str]:
        counts = self.observed_counts()
        return [name for name, c in zip(self.column_names, counts) if c == 0]

    def validate_columns(self) -> "MaskedMatrix":
        """Reject matrices with a response column that is never observed."""
        missing = self.fully_missing_columns()
        if missing:
            raise fully_missing_columns_error(missing)
        return self


class ModelParams(BaseModel):
    """Intercepts b0 (q), coefficients B (p x q) and precision matrix K (q x q)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    b0: np.ndarray
    B: np.ndarray
    K: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _check(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        b0 = np.array(data.get("b0"), dtype=float).reshape(-1)
        B = np.array(data.get("B"), dtype=float)
        K = np.array(data.get("K"), dtype=float)
        q = b0.shape[0]
        if B.ndim != 2 or B.shape[1] != q:
            raise dimension_mismatch_error("B shape", f"(p, {q})", B.shape)
        if K.shape != (q, q):
            raise dimension_mismatch_error("K shape", (q, q), K.shape)
        if not (np.all(np.isfinite(b0)) and np.all(np.isfinite(B))):
            raise non_finite_error("coefficients")
        check_spd(K, "K")
        return {
            "b0": frozen_array(b0),
            "B": frozen_array(B),
            "K": frozen_array(0.5 * (K + K.T)),
        }

    @property
    def p(self) -> int:
        return int(self.B.shape[0])

    @property
    def q(self) -> int:
        return int(self.B.shape[1])

    @property
    def B_tilde(self) -> np.ndarray:
        """Stacked (p + 1) x q matrix with the intercepts as first row."""
        return np.vstack([self.b0[None, :], self.B])

    @property
    def sigma(self) -> np.ndarray:
        """Response covariance K^-1."""
        return spd_inverse(self.K, "K")

    def predict(self, X: ArrayLike) -> np.ndarray:
        """Complete predictions b0 + X B."""
        X_arr = np.asarray(X, dtype=float)
        if X_arr.ndim != 2 or X_arr.shape[1] != self.p:
            raise dimension_mismatch_error("X columns", self.p, X_arr.shape)
        return self.b0[None, :] + X_arr @ self.B


class Dataset(BaseModel):
    """Complete design matrix X, masked responses Y and optional split tags."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray
    Y: MaskedMatrix
    predictor_names: Tuple[str, ...] = ()
    split: Optional[Tuple[SplitTag, ...]] = None
    split_retries: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _check(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        X = np.array(data.get("X"), dtype=float)
        Y = data.get("Y")
        if X.ndim != 2:
            raise dimension_mismatch_error("X", "2-d matrix", X.shape)
        if not np.all(np.isfinite(X)):
            raise non_finite_error("X (predictors must be complete)")
        if isinstance(Y, MaskedMatrix) and Y.n_rows != X.shape[0]:
            raise dimension_mismatch_error("Y rows", X.shape[0], Y.n_rows)
        names = tuple(str(n) for n in (data.get("predictor_names") or ())) or tuple(
            f"x{j + 1}" for j in range(X.shape[1])
        )
        if len(names) != X.shape[1]:
            raise dimension_mismatch_error("predictor_names", X.shape[1], len(names))
        split = data.get("split")
        if split is not None:
            split = tuple(SplitTag(tag) for tag in split)
            if len(split) != X.shape[0]:
                raise dimension_mismatch_error("split tags", X.shape[0], len(split))
        return {
            **data,
            "X": frozen_array(X),
            "predictor_names": names,
            "split": split,
        }

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def q(self) -> int:
        return self.Y.n_cols

    @property
    def response_names(self) -> Tuple[str, ...]:
        return self.Y.column_names

    @property
    def x_tilde(self) -> np.ndarray:
        """Design matrix with a leading column of ones."""
        return np.hstack([np.ones((self.n, 1)), self.X])

    def subset(self, rows: ArrayLike) -> "Dataset":
        idx = np.asarray(rows, dtype=int)
        return Dataset(
            X=self.X[idx],
            Y=self.Y.take_rows(idx),
            predictor_names=self.predictor_names,
            split=None if self.split is None else tuple(self.split[i] for i in idx),
            split_retries=self.split_retries,
        )

    def rows_tagged(self, tag: SplitTag) -> np.ndarray:
        if self.split is None:
            raise InvalidInputError("dataset has no train/test split")
        return np.asarray(
            [i for i, t in enumerate(self.split) if t == tag], dtype=int
        )

    def train(self) -> "Dataset":
        return self.subset(self.rows_tagged(SplitTag.TRAIN))

    def test(self) -> "Dataset":
        return self.subset(self.rows_tagged(SplitTag.TEST))

    def with_responses(self, Y: MaskedMatrix) -> "Dataset":
        return Dataset(
            X=self.X,
            Y=Y,
            predictor_names=self.predictor_names,
            split=self.split,
            split_retries=self.split_retries,
        )
