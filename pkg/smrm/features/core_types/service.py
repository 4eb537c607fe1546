"""Row partitions and conditional Gaussian computations in precision form."""

from typing import List, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from smrm.features.core_types.errors import dimension_mismatch_error
from smrm.features.core_types.linalg import check_spd, spd_inverse
from smrm.features.core_types.schemas import RowPartition


def partition_row(mask_row: ArrayLike) -> RowPartition:
    """Split a boolean row mask into ascending observed / missing indices."""
    row = np.asarray(mask_row, dtype=bool).reshape(-1)
    return RowPartition(
        obs_idx=tuple(int(l) for l in np.flatnonzero(row)),
        mis_idx=tuple(int(l) for l in np.flatnonzero(~row)),
    )


def group_rows_by_pattern(mask: ArrayLike) -> List[Tuple[RowPartition, np.ndarray]]:
    """Group rows sharing a missingness pattern.

    Patterns come back in lexicographic order of the mask rows and row
    indices ascend within each group, so reductions over the groups have a
    fixed order.
    """
    mask_arr = np.asarray(mask, dtype=bool)
    if mask_arr.shape[0] == 0:
        return []
    patterns, inverse = np.unique(mask_arr, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    return [
        (partition_row(pattern), np.flatnonzero(inverse == k))
        for k, pattern in enumerate(patterns)
    ]


def conditional_gaussian(
    mu: ArrayLike, K: ArrayLike, part: RowPartition, y_obs: ArrayLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Conditional law of the missing block given the observed block.

    Returns the mean ``mu_mis - K_mm^-1 K_mo (y_obs - mu_obs)`` and the
    conditional precision ``K_mm``.
    """
    mu_arr = np.asarray(mu, dtype=float).reshape(-1)
    K_arr = np.asarray(K, dtype=float)
    y = np.asarray(y_obs, dtype=float).reshape(-1)
    if mu_arr.shape[0] != part.size:
        raise dimension_mismatch_error("mu length", part.size, mu_arr.shape[0])
    if K_arr.shape != (part.size, part.size):
        raise dimension_mismatch_error("K shape", (part.size, part.size), K_arr.shape)
    if y.shape[0] != len(part.obs_idx):
        raise dimension_mismatch_error("y_obs length", len(part.obs_idx), y.shape[0])
    check_spd(K_arr, "K")

    obs, mis = part.obs, part.mis
    if mis.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    K_mm = K_arr[np.ix_(mis, mis)]
    cond_mean = mu_arr[mis].copy()
    if obs.size:
        factor = linalg.cho_factor(K_mm, lower=True, check_finite=False)
        shift = K_arr[np.ix_(mis, obs)] @ (y - mu_arr[obs])
        cond_mean -= linalg.cho_solve(factor, shift, check_finite=False)
    return cond_mean, K_mm.copy()


def conditional_covariance(K: ArrayLike, part: RowPartition) -> np.ndarray:
    """K_mm^-1, the covariance of the missing block given the observed one."""
    K_arr = np.asarray(K, dtype=float)
    mis = part.mis
    if mis.size == 0:
        return np.zeros((0, 0))
    return spd_inverse(K_arr[np.ix_(mis, mis)], "K_mis,mis")


def precision_to_correlation(K: ArrayLike) -> np.ndarray:
    """Correlation matrix of Sigma = K^-1."""
    sigma = spd_inverse(K, "K")
    scale = np.sqrt(np.diag(sigma))
    corr = np.clip(sigma / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return 0.5 * (corr + corr.T)


def precision_to_partial_correlation(K: ArrayLike) -> np.ndarray:
    """Partial correlations -K_ll' / sqrt(K_ll K_l'l') with unit diagonal."""
    K_arr = np.asarray(K, dtype=float)
    check_spd(K_arr, "K")
    scale = np.sqrt(np.diag(K_arr))
    partial = np.clip(-K_arr / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(partial, 1.0)
    return 0.5 * (partial + partial.T)
