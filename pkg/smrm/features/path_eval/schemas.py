"""Schemas for the train/test protocol, penalty matrices and path results."""

from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from smrm.core.errors import InvalidInputError
from smrm.features.core_types.schemas import frozen_array
from smrm.features.estimation.schemas import SmrmFit
from smrm.features.lasso.schemas import LassoCVResult, LassoFit


class Lambda2Mode(str, Enum):
    """How the coefficient penalty matrix is built from the baseline."""

    UNIFORM = "uniform"
    ADJUSTED = "adjusted"


class EvaluationScale(str, Enum):
    """Scale the responses are modeled and evaluated on."""

    RAW = "raw"
    LOG = "log"


class Lambda2Matrix(BaseModel):
    """p x q coefficient penalties, constant within each response column.

    ``values[j, l] = r * base[l]`` where ``base`` is the per-response lasso
    penalty, multiplied by ``a[l]`` in adjusted mode.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    base: np.ndarray = Field(..., description="Per-response row before scaling by r")
    r: float
    mode: Lambda2Mode = Lambda2Mode.UNIFORM
    a: Optional[np.ndarray] = None

    @field_validator("values", "base", "a", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> Any:
        return None if value is None else frozen_array(value)

    @model_validator(mode="after")
    def _check(self) -> "Lambda2Matrix":
        if self.r == 0.0 or not np.isfinite(self.r):
            raise InvalidInputError(
                f"r must be a finite nonzero multiplier, got {self.r}", {"r": self.r}
            )
        if self.values.ndim != 2 or self.values.shape[1] != self.base.shape[0]:
            raise InvalidInputError("lambda2 values must be p x q with q = len(base)")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise InvalidInputError(
                "lambda2 entries must be finite and >= 0",
                {"r": self.r, "min": float(np.min(self.values, initial=0.0))},
            )
        if self.values.shape[0] and np.any(self.values != self.values[0]):
            raise InvalidInputError("lambda2 must be constant within each column")
        if self.mode is Lambda2Mode.ADJUSTED and self.a is None:
            raise InvalidInputError("adjusted lambda2 needs the vector a")
        return self

    @property
    def p(self) -> int:
        return int(self.values.shape[0])

    @property
    def q(self) -> int:
        return int(self.values.shape[1])

    @property
    def row(self) -> np.ndarray:
        """The length-q row replicated over predictors."""
        return self.r * self.base if self.a is None else self.r * self.base * self.a


class EvalReport(BaseModel):
    """Test-set errors of one model against the lasso reference.

    Only observed test entries count. Responses without a single observed
    test entry are excluded from the sums and listed in
    ``excluded_responses``; ``mse_tilde_lasso`` equals ``q_effective``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    response_names: Tuple[str, ...]
    per_response_mse_lasso: np.ndarray
    per_response_mse_smrm: np.ndarray
    per_response_mse_tilde: np.ndarray
    mse_tilde_lasso: float
    mse_tilde_smrm: float
    q_effective: int = Field(..., ge=0)
    excluded_responses: Tuple[str, ...] = ()
    lambda1: Optional[float] = None
    r: Optional[float] = None
    scale: EvaluationScale = EvaluationScale.RAW
    correlation_matrix: Optional[np.ndarray] = None

    @field_validator(
        "per_response_mse_lasso",
        "per_response_mse_smrm",
        "per_response_mse_tilde",
        "correlation_matrix",
        mode="before",
    )
    @classmethod
    def _freeze(cls, value: Any) -> Any:
        return None if value is None else frozen_array(value)

    def as_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "lambda1": self.lambda1,
            "r": self.r,
            "mse_tilde_smrm": self.mse_tilde_smrm,
            "mse_tilde_lasso": self.mse_tilde_lasso,
            "q_effective": self.q_effective,
        }
        for name, value in zip(self.response_names, self.per_response_mse_tilde):
            row[f"tilde_{name}"] = float(value)
        return row


class BaselineResult(BaseModel):
    """Per-response lasso baseline fitted on the training rows."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    response_names: Tuple[str, ...]
    lambda_train: np.ndarray
    train_mse: np.ndarray
    a: np.ndarray
    test_mse: np.ndarray
    fits: Tuple[LassoFit, ...]
    cv: Tuple[LassoCVResult, ...]
    n_folds: int
    cv_seed: int

    @field_validator("lambda_train", "train_mse", "a", "test_mse", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> np.ndarray:
        return frozen_array(value).reshape(-1)

    @property
    def q(self) -> int:
        return len(self.response_names)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """n x q predictions, one lasso per column."""
        X_arr = np.asarray(X, dtype=float)
        return np.column_stack([fit.beta0 + X_arr @ fit.beta for fit in self.fits])


class PathPoint(BaseModel):
    """One grid point of a warm-started path.

    A point whose fit raised a structured error keeps ``fit`` empty and the
    error record in ``error``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    index: int = Field(..., ge=0)
    lambda1: float
    fit: Optional[SmrmFit] = None
    report: Optional[EvalReport] = None
    error: Optional[Dict[str, Any]] = None

    @property
    def failed(self) -> bool:
        return self.fit is None

    @property
    def converged(self) -> bool:
        return self.fit is not None and self.fit.converged

    @property
    def em_iters(self) -> int:
        return 0 if self.fit is None else self.fit.em_iters

    @property
    def mse_tilde(self) -> float:
        if self.report is None:
            return float("nan")
        return self.report.mse_tilde_smrm


class PathResult(BaseModel):
    """All grid points of one r value."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    r: float
    lambda2: Lambda2Matrix
    points: Tuple[PathPoint, ...]
    scale: EvaluationScale = EvaluationScale.RAW

    @property
    def lambda1_values(self) -> np.ndarray:
        return np.asarray([pt.lambda1 for pt in self.points])

    @property
    def mse_tilde(self) -> np.ndarray:
        return np.asarray([pt.mse_tilde for pt in self.points])

    @property
    def n_failed(self) -> int:
        return sum(pt.failed for pt in self.points)

    @property
    def n_converged(self) -> int:
        return sum(pt.converged for pt in self.points)


class ReferencePoints(BaseModel):
    """Grid indices exported as heatmaps."""

    model_config = ConfigDict(frozen=True)

    best: int
    better1: int
    better2: int
    last: int

    def items(self) -> Tuple[Tuple[str, int], ...]:
        return (
            ("best", self.best),
            ("better1", self.better1),
            ("better2", self.better2),
            ("last", self.last),
        )
