"""Schemas for the run metadata sidecar."""

from datetime import datetime, timezone
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from smrm.core.config import settings


class ArtifactRecord(BaseModel):
    """One file written by a run, relative to the output directory."""

    model_config = ConfigDict(frozen=True)

    path: str
    kind: str = Field(..., description="csv, svg, json or env")
    description: str = ""


class ConventionFlags(BaseModel):
    """Penalty and evaluation conventions every artifact depends on."""

    model_config = ConfigDict(frozen=True)

    lambda1_penalty: str = "lambda1 * sum_{l != l'} |k_ll'| (ordered pairs)"
    lambda2_penalty: str = "factor 2 kept explicit: 2 * sum_{j,l} lambda2_jl |b_jl|"
    lasso_objective: str = "(1/n) ||y - beta0 - X beta||^2 + lambda ||beta||_1"
    evaluation_scale: str = "raw"
    split_rule: str = "train = floor(ratio * n), rng = default_rng([seed, attempt])"
    em_criterion: str = "sum |B^(m+1) - B^(m)| < epsilon, intercepts excluded"
    cv_folds: Optional[int] = None


class RunMetadata(BaseModel):
    """Structured sidecar describing one CLI run."""

    model_config = ConfigDict(frozen=True)

    app_name: str = settings.app_name
    version: str = settings.version
    subcommand: str
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    seeds: Dict[str, int] = Field(default_factory=dict)
    conventions: ConventionFlags = Field(default_factory=ConventionFlags)
    config: Dict[str, Any] = Field(default_factory=dict)
    summary: Dict[str, Any] = Field(default_factory=dict)
    artifacts: Tuple[ArtifactRecord, ...] = ()
