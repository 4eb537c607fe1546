"""Worker pool configuration."""

import os

from smrm.core.config import settings


class WorkerSettings:
    """Configuration for the r-sweep process pool."""

    max_jobs = settings.max_jobs  # Chains running at once; 1 runs in-process


def resolve_max_jobs(requested: int) -> int:
    """Clamp a requested worker count to [1, cpu_count].

    Zero or a negative value means one worker per CPU.
    """
    cpus = os.cpu_count() or 1
    if requested <= 0:
        return cpus
    return min(requested, cpus)
