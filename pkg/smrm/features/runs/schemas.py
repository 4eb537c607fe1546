"""Schemas for CLI runs: subcommands and the per-run configuration."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError
from smrm.features.ingestion.schemas import (
    MissingMechanism,
    PrecisionPattern,
    SyntheticSpec,
)
from smrm.features.path_eval.schemas import EvaluationScale, Lambda2Mode


class Subcommand(str, Enum):
    """CLI subcommands."""

    BASELINE = "baseline"
    FIT = "fit"
    PATH = "path"
    SIMULATE = "simulate"
    MISSINGNESS = "missingness"


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class RunConfig(BaseModel):
    """Configuration of one CLI run.

    Loaded from a flat ``key = value`` file; every key can be overridden by
    a ``--key value`` flag. List values are comma separated.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Input
    data_path: Optional[Path] = None
    missing_token: str = "NA"
    response_columns: List[str] = Field(default_factory=list)
    predictor_columns: List[str] = Field(
        default_factory=list, description="Empty selects every non-response column"
    )
    scale: EvaluationScale = EvaluationScale.RAW

    # Output
    output_dir: Path = Path("smrm-output")
    heatmap_svg: bool = True

    # Train/test split
    split_ratio: float = Field(default=settings.split_ratio, gt=0, lt=1)
    split_seed: int = settings.split_seed
    split_max_retries: int = Field(default=settings.split_max_retries, ge=0)

    # Lasso baseline
    cv_folds: int = Field(default=settings.cv_folds, ge=2)
    cv_seed: int = settings.cv_seed

    # Penalties
    lambda1: float = Field(default=0.1, ge=0, description="Single fit only")
    r: float = Field(default=1.0, description="Single fit only")
    lambda1_low: float = Field(default=settings.lambda1_low, gt=0)
    lambda1_high: float = Field(default=settings.lambda1_high, gt=0)
    lambda1_points: int = Field(default=settings.lambda1_points, ge=2)
    r_values: List[float] = Field(default_factory=lambda: list(settings.r_values))
    lambda2_mode: Lambda2Mode = Lambda2Mode.UNIFORM

    # Solver controls
    em_epsilon: float = Field(default=settings.em_epsilon, gt=0)
    em_max_iter: int = Field(default=settings.em_max_iter, ge=1)
    inner_tol: float = Field(default=settings.inner_tol, gt=0)
    inner_max_iter: int = Field(default=settings.inner_max_iter, ge=1)
    glasso_tol: float = Field(default=settings.glasso_tol, gt=0)
    glasso_max_iter: int = Field(default=settings.glasso_max_iter, ge=1)
    max_jobs: int = settings.max_jobs

    # Synthetic data
    sim_n: int = Field(default=200, ge=2)
    sim_p: int = Field(default=5, ge=1)
    sim_q: int = Field(default=4, ge=1)
    sim_coef_density: float = Field(default=0.3, ge=0, le=1)
    sim_precision_pattern: PrecisionPattern = PrecisionPattern.CHAIN
    sim_n_edges: int = Field(default=0, ge=0)
    sim_edge_strength: float = Field(default=0.5, gt=0)
    sim_noise_scale: float = Field(default=1.0, gt=0)
    sim_mechanism: MissingMechanism = MissingMechanism.MCAR
    sim_missing_rate: float = Field(default=0.4, ge=0, le=1)
    sim_seed: int = 0

    @field_validator("response_columns", "predictor_columns", "r_values", mode="before")
    @classmethod
    def _comma_list(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("r", "r_values")
    @classmethod
    def _nonzero_r(cls, value: Any) -> Any:
        values = value if isinstance(value, list) else [value]
        if any(v == 0 for v in values):
            raise InvalidInputError("r must be nonzero", {"r": value})
        return value

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        overlap = sorted(set(self.response_columns) & set(self.predictor_columns))
        if overlap:
            names = ", ".join(overlap)
            raise InvalidInputError(
                f"Columns declared as both predictor and response: {names}",
                {"columns": overlap},
            )
        if self.lambda1_low >= self.lambda1_high:
            raise InvalidInputError(
                "lambda1_low must be below lambda1_high",
                {"lambda1_low": self.lambda1_low, "lambda1_high": self.lambda1_high},
            )
        if not self.r_values:
            raise InvalidInputError("r_values must not be empty")
        return self

    def require_data(self) -> Path:
        """Input path and response names, which every data subcommand needs."""
        if self.data_path is None:
            raise InvalidInputError("data_path is required for this subcommand")
        if not self.response_columns:
            raise InvalidInputError("response_columns is required for this subcommand")
        return self.data_path

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n=self.sim_n,
            p=self.sim_p,
            q=self.sim_q,
            coef_density=self.sim_coef_density,
            precision_pattern=self.sim_precision_pattern,
            n_edges=self.sim_n_edges,
            edge_strength=self.sim_edge_strength,
            noise_scale=self.sim_noise_scale,
            mechanism=self.sim_mechanism,
            missing_rate=self.sim_missing_rate,
            seed=self.sim_seed,
        )

    def seeds(self) -> Dict[str, int]:
        return {
            "split_seed": self.split_seed,
            "cv_seed": self.cv_seed,
            "sim_seed": self.sim_seed,
        }
