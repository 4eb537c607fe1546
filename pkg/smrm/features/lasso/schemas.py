"""Schemas for per-response lasso fits."""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from smrm.features.core_types.schemas import frozen_array


class LassoFit(BaseModel):
    """Solution of (1/n)||y - beta0 - X beta||^2 + lambda ||beta||_1."""

    model_config = ConfigDict(
        arbitrary_types_allowed=True, frozen=True, populate_by_name=True
    )

    beta0: float
    beta: np.ndarray
    lambda_: float = Field(..., ge=0, alias="lambda")
    n_iter: int = Field(..., ge=0)
    converged: bool = True
    kkt_violation: float = 0.0
    objective_trace: Tuple[float, ...] = ()

    @field_validator("beta", mode="before")
    @classmethod
    def _freeze(cls, value: np.ndarray) -> np.ndarray:
        beta = frozen_array(value).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        return beta

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.beta))


class LassoCVResult(BaseModel):
    """Outcome of k-fold cross-validation over a descending lambda grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    best_lambda: float
    best_index: int
    lambda_grid: np.ndarray
    cv_errors: np.ndarray
    cv_std: np.ndarray
    n_folds: int
    seed: int
    fit: LassoFit = Field(..., description="Refit on all rows at best_lambda")

    @field_validator("lambda_grid", "cv_errors", "cv_std", mode="before")
    @classmethod
    def _freeze(cls, value: np.ndarray) -> np.ndarray:
        return frozen_array(value).reshape(-1)
