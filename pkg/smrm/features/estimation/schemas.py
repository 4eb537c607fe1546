"""Schemas for the EM estimation of (B-tilde, K) with missing responses."""

from typing import Any, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError
from smrm.features.core_types.schemas import ModelParams, frozen_array


class SmrmConfig(BaseModel):
    """Penalties and solver controls of one SMRM fit.

    ``lambda1`` weights every ordered off-diagonal pair of K; the coefficient
    penalty is ``2 * sum(lambda2 * |B|)`` with the factor 2 kept explicit.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lambda1: float = Field(..., ge=0)
    lambda2: np.ndarray
    epsilon: float = Field(default=settings.em_epsilon, gt=0)
    max_em_iter: int = Field(default=settings.em_max_iter, ge=1)
    inner_tol: float = Field(default=settings.inner_tol, gt=0)
    inner_max_iter: int = Field(default=settings.inner_max_iter, ge=1)
    glasso_tol: float = Field(default=settings.glasso_tol, gt=0)
    glasso_max_iter: int = Field(default=settings.glasso_max_iter, ge=1)
    descent_tolerance: float = Field(default=settings.descent_tolerance, ge=0)

    @field_validator("lambda2", mode="before")
    @classmethod
    def _lambda2_matrix(cls, value: Any) -> np.ndarray:
        matrix = getattr(value, "values", value)
        array = frozen_array(matrix)
        if array.ndim != 2:
            raise InvalidInputError("lambda2 must be a p x q matrix")
        if not np.all(np.isfinite(array)) or np.any(array < 0):
            raise InvalidInputError("lambda2 entries must be finite and >= 0")
        return array

    def with_lambda1(self, lambda1: float) -> "SmrmConfig":
        return self.model_copy(update={"lambda1": float(lambda1)})


class EStepResult(BaseModel):
    """Imputed responses and expected second moments."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    Y_hat: np.ndarray
    expected_scatter: np.ndarray
    conditional_cov_sum: np.ndarray = Field(
        ..., description="Sum over rows of the conditional covariances"
    )

    @field_validator("Y_hat", "expected_scatter", "conditional_cov_sum", mode="before")
    @classmethod
    def _freeze(cls, value: np.ndarray) -> np.ndarray:
        return frozen_array(value)

    @property
    def n(self) -> int:
        return int(self.Y_hat.shape[0])


class SmrmFit(BaseModel):
    """Result of the EM loop."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    params: ModelParams
    objective_trace: Tuple[float, ...]
    surrogate_trace: Tuple[float, ...] = ()
    delta_trace: Tuple[float, ...] = ()
    em_iters: int = Field(..., ge=0)
    converged: bool
    Y_imputed: np.ndarray
    lambda1: float = Field(..., ge=0)

    @field_validator("Y_imputed", mode="before")
    @classmethod
    def _freeze(cls, value: np.ndarray) -> np.ndarray:
        return frozen_array(value)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]
