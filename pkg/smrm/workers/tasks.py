"""Background execution of lambda1 paths, one task per r value."""

from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from smrm.features.core_types.schemas import Dataset
from smrm.features.estimation.schemas import SmrmConfig
from smrm.features.path_eval.schemas import EvaluationScale, Lambda2Matrix, PathResult
from smrm.features.path_eval.service import run_path
from smrm.workers.config import WorkerSettings, resolve_max_jobs


class PathTask(BaseModel):
    """Everything one warm-start chain needs; picklable for the pool."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dataset: Dataset
    lambda2: Lambda2Matrix
    grid: Tuple[float, ...]
    reference_mse: Optional[np.ndarray] = None
    config: Optional[SmrmConfig] = None
    scale: EvaluationScale = EvaluationScale.RAW


def run_path_task(task: PathTask) -> PathResult:
    """Run one chain.

    Args:
        task: dataset, penalty matrix and grid of the chain

    Returns:
        PathResult for the task's r value
    """
    logger.info(f"Starting path r={task.lambda2.r:g} ({len(task.grid)} points)")
    result = run_path(
        task.dataset,
        task.lambda2,
        task.grid,
        reference_mse=task.reference_mse,
        config=task.config,
        scale=task.scale,
    )
    logger.info(
        f"Finished path r={task.lambda2.r:g}: {result.n_converged} converged, "
        f"{result.n_failed} failed"
    )
    return result


def run_path_tasks(
    tasks: Sequence[PathTask], max_jobs: Optional[int] = None
) -> List[PathResult]:
    """Run chains sequentially or in a process pool; results keep task order."""
    jobs = resolve_max_jobs(WorkerSettings.max_jobs if max_jobs is None else max_jobs)
    jobs = min(jobs, max(len(tasks), 1))
    if jobs == 1:
        return [run_path_task(task) for task in tasks]

    logger.info(f"Running {len(tasks)} paths on {jobs} worker processes")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_path_task, tasks))
