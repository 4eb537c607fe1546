"""Schemas for the graphical lasso solver."""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from smrm.features.core_types.schemas import frozen_array


class GlassoResult(BaseModel):
    """Sparse precision estimate and its inverse."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: np.ndarray
    Sigma: np.ndarray
    lambda1: float = Field(..., ge=0)
    n_iter: int = Field(..., ge=0)
    converged: bool
    duality_gap: float
    objective_trace: Tuple[float, ...] = ()

    @field_validator("K", "Sigma", mode="before")
    @classmethod
    def _freeze(cls, value: np.ndarray) -> np.ndarray:
        return frozen_array(value)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def n_edges(self, atol: float = 0.0) -> int:
        """Number of nonzero off-diagonal pairs."""
        off = np.abs(np.triu(self.K, k=1))
        return int(np.count_nonzero(off > atol))
