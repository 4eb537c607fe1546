from pathlib import Path
from typing import Callable, Tuple

import numpy as np
import pytest

from smrm.core.logging import setup_logging
from smrm.features.core_types.schemas import Dataset, ModelParams
from smrm.features.ingestion.schemas import SyntheticSpec
from smrm.features.ingestion.synthetic import generate_synthetic

# Keep test output readable; solvers log every sweep at DEBUG
setup_logging("WARNING")


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator, fresh per test."""
    return np.random.default_rng(20240607)


def random_spd(rng: np.random.Generator, q: int, ridge: float = 0.5) -> np.ndarray:
    """Well-conditioned random SPD matrix."""
    A = rng.normal(size=(q, q))
    return A @ A.T / q + ridge * np.eye(q)


@pytest.fixture
def make_spd(rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    """Factory for random SPD matrices."""

    def _make(q: int, ridge: float = 0.5) -> np.ndarray:
        return random_spd(rng, q, ridge)

    return _make


@pytest.fixture
def synthetic_missing() -> Tuple[Dataset, ModelParams]:
    """n=120, p=4, q=3 with 30% MCAR missing responses."""
    spec = SyntheticSpec(n=120, p=4, q=3, missing_rate=0.3, coef_density=0.5, seed=7)
    return generate_synthetic(spec)


@pytest.fixture
def synthetic_complete() -> Tuple[Dataset, ModelParams]:
    """n=100, p=4, q=3, no missing responses."""
    spec = SyntheticSpec(n=100, p=4, q=3, missing_rate=0.0, coef_density=0.5, seed=3)
    return generate_synthetic(spec)


@pytest.fixture
def small_csv(tmp_path: Path) -> Path:
    """Three rows, two predictors, two responses, one missing response."""
    path = tmp_path / "small.csv"
    path.write_text(
        "x1,x2,y1,y2\n"
        "1.0,2.5,3.0,NA\n"
        "-0.5,1e-3,4.25,1.0\n"
        "2.0,0.0,5.5,2.0\n",
        encoding="utf-8",
    )
    return path
