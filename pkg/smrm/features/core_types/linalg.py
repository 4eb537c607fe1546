"""Small dense linear-algebra helpers built on SciPy's Cholesky routines."""

from typing import Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from smrm.features.core_types.errors import dimension_mismatch_error, not_spd_error

SYMMETRY_RTOL = 1e-10

CholeskyFactor = Tuple[np.ndarray, bool]


def check_spd(matrix: ArrayLike, name: str = "K") -> CholeskyFactor:
    """Verify that ``matrix`` is symmetric positive definite.

    Symmetry is checked to ``1e-10 * max|K|``; definiteness by attempting a
    Cholesky factorization. Returns the factor for reuse with ``cho_solve``.
    """
    K = np.asarray(matrix, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise dimension_mismatch_error(f"{name} shape", "square matrix", K.shape)
    if K.shape[0] == 0:
        return K.copy(), True
    if not np.all(np.isfinite(K)):
        raise not_spd_error(name, "non-finite entries")
    scale = float(np.max(np.abs(K)))
    if scale == 0.0:
        raise not_spd_error(name, "zero matrix")
    if float(np.max(np.abs(K - K.T))) > SYMMETRY_RTOL * scale:
        raise not_spd_error(name, "not symmetric")
    try:
        return linalg.cho_factor(K, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise not_spd_error(name, "Cholesky factorization failed")


def is_spd(matrix: ArrayLike) -> bool:
    """Return True when ``matrix`` passes :func:`check_spd`."""
    try:
        check_spd(matrix)
    except Exception:
        return False
    return True


def spd_inverse(matrix: ArrayLike, name: str = "K") -> np.ndarray:
    """Invert an SPD matrix through its Cholesky factor; result is symmetric."""
    factor = check_spd(matrix, name)
    q = factor[0].shape[0]
    if q == 0:
        return np.zeros((0, 0))
    inverse = linalg.cho_solve(factor, np.eye(q), check_finite=False)
    return 0.5 * (inverse + inverse.T)


def spd_logdet(matrix: ArrayLike, name: str = "K") -> float:
    """log|K| from the Cholesky diagonal."""
    factor = check_spd(matrix, name)
    if factor[0].shape[0] == 0:
        return 0.0
    return float(2.0 * np.sum(np.log(np.diag(factor[0]))))


def soft_threshold(
    z: Union[float, np.ndarray], t: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """S(z, t) = sign(z) * max(|z| - t, 0), scalar or elementwise."""
    if np.isscalar(z) and np.isscalar(t):
        if z > t:
            return float(z - t)
        if z < -t:
            return float(z + t)
        return 0.0
    z_arr = np.asarray(z, dtype=float)
    return np.sign(z_arr) * np.maximum(np.abs(z_arr) - t, 0.0)
