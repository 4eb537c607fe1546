"""Schemas for synthetic data generation and recovery checks."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from smrm.core.errors import InvalidInputError


class MissingMechanism(str, Enum):
    """How response entries are removed."""

    MCAR = "mcar"  # Independent of everything
    MAR = "mar"  # Depends on the always-observed first response


class PrecisionPattern(str, Enum):
    """Off-diagonal support of the true precision matrix."""

    CHAIN = "chain"  # Neighbouring responses l, l + 1
    RANDOM = "random"  # n_edges pairs drawn uniformly


class SyntheticSpec(BaseModel):
    """Shape, sparsity, noise and missingness of a synthetic dataset."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=2, description="Number of rows")
    p: int = Field(..., ge=1, description="Number of predictors")
    q: int = Field(..., ge=1, description="Number of responses")

    coef_density: float = Field(
        default=0.3, ge=0, le=1, description="Fraction of nonzero coefficients"
    )
    coef_scale: float = Field(default=1.0, gt=0)

    precision_pattern: PrecisionPattern = PrecisionPattern.CHAIN
    n_edges: int = Field(default=0, ge=0, description="Pairs for the random pattern")
    edge_strength: float = Field(default=0.5, gt=0)
    noise_scale: float = Field(default=1.0, gt=0)

    mechanism: MissingMechanism = MissingMechanism.MCAR
    missing_rate: float = Field(default=0.0, ge=0, le=1)
    mar_strength: float = Field(default=1.5, ge=0)
    max_retries: int = Field(default=100, ge=0)

    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "SyntheticSpec":
        pairs = self.q * (self.q - 1) // 2
        if self.n_edges > pairs:
            raise InvalidInputError(
                f"n_edges={self.n_edges} exceeds the {pairs} available pairs",
                {"n_edges": self.n_edges, "pairs": pairs},
            )
        if self.mechanism is MissingMechanism.MAR and self.q < 2:
            raise InvalidInputError("MAR missingness needs at least two responses")
        return self


class RecoveryReport(BaseModel):
    """How well a fit recovers the generating parameters."""

    model_config = ConfigDict(frozen=True)

    precision_auc: float = Field(
        ..., description="AUC of |K_hat| off-diagonals against the true support"
    )
    true_edges: int
    estimated_edges: int
    coefficient_rmse: float
    support_precision: float
    support_recall: float
