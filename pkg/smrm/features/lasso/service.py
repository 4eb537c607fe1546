"""Per-response lasso by cyclic coordinate descent, with k-fold CV.

The objective keeps the (1/n) loss scaling,

    (1/n) ||y - beta0 1 - X beta||^2 + lambda ||beta||_1,

so the one-dimensional update thresholds at lambda / 2 and the
full-shrinkage threshold is lambda_max = 2 max_j |x_j^T (y - ybar)| / n.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from sklearn.model_selection import KFold

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError
from smrm.core.logging import logger
from smrm.features.core_types.errors import dimension_mismatch_error, non_finite_error
from smrm.features.lasso.schemas import LassoCVResult, LassoFit


def _as_design(X: ArrayLike, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    X_arr = np.asarray(X, dtype=float)
    y_arr = np.asarray(y, dtype=float).reshape(-1)
    if X_arr.ndim != 2:
        raise dimension_mismatch_error("X", "2-d matrix", X_arr.shape)
    if X_arr.shape[0] != y_arr.shape[0]:
        raise dimension_mismatch_error("y length", X_arr.shape[0], y_arr.shape[0])
    if X_arr.shape[0] < 1:
        raise InvalidInputError("lasso needs at least one row", {"n": 0})
    if not np.all(np.isfinite(X_arr)):
        raise non_finite_error("X")
    if not np.all(np.isfinite(y_arr)):
        raise non_finite_error("y")
    return X_arr, y_arr


def _check_penalty(lam: float) -> float:
    if not np.isfinite(lam) or lam < 0:
        raise InvalidInputError(
            f"lasso penalty must be finite and >= 0, got {lam}", {"lambda": lam}
        )
    return float(lam)


def lasso_objective(
    X: ArrayLike, y: ArrayLike, beta0: float, beta: ArrayLike, lam: float
) -> float:
    """(1/n)||y - beta0 - X beta||^2 + lam ||beta||_1."""
    X_arr, y_arr = _as_design(X, y)
    b = np.asarray(beta, dtype=float).reshape(-1)
    resid = y_arr - beta0 - X_arr @ b
    return float(resid @ resid / y_arr.shape[0] + lam * np.abs(b).sum())


def lambda_max(X: ArrayLike, y: ArrayLike) -> float:
    """Smallest penalty at which every coefficient is zero."""
    X_arr, y_arr = _as_design(X, y)
    n = X_arr.shape[0]
    if X_arr.shape[1] == 0:
        return 0.0
    Xc = X_arr - X_arr.mean(axis=0)
    return float(2.0 * np.max(np.abs(Xc.T @ (y_arr - y_arr.mean()))) / n)


def default_lambda_grid(
    X: ArrayLike,
    y: ArrayLike,
    n_points: int = settings.cv_grid_size,
    ratio: float = settings.cv_grid_ratio,
) -> np.ndarray:
    """Log-spaced descending grid from lambda_max down to ratio * lambda_max."""
    top = lambda_max(X, y)
    if top <= 0.0:
        return np.zeros(1)
    return np.geomspace(top, top * ratio, n_points)


def _kkt_violations(
    grad: np.ndarray, beta: np.ndarray, lam: float
) -> np.ndarray:
    """Per-coordinate subgradient violation; ``grad`` is -(2/n) Xc' r."""
    return np.where(
        beta != 0,
        np.abs(grad + lam * np.sign(beta)),
        np.maximum(np.abs(grad) - lam, 0.0),
    )


def lasso_fit(
    X: ArrayLike,
    y: ArrayLike,
    lam: float,
    tol: float = settings.lasso_tol,
    max_iter: int = settings.lasso_max_iter,
    beta_init: Optional[ArrayLike] = None,
) -> LassoFit:
    """Fit the lasso by cyclic coordinate descent.

    Coordinates are updated through the Gram matrix, so one update costs
    O(p) instead of O(n). After a full sweep, sweeps are restricted to the
    nonzero coefficients until those satisfy the optimality conditions, then
    a full sweep checks the rest. Stops once every coordinate satisfies the
    subgradient conditions to within ``tol``. Hitting ``max_iter`` sweeps
    returns the last iterate flagged as not converged.

    Args:
        X: n x p design matrix
        y: length-n response
        lam: penalty >= 0
        tol: tolerance on the KKT violation
        max_iter: maximum number of sweeps
        beta_init: warm start for the coefficients

    Returns:
        LassoFit with the intercept, coefficients and per-sweep objective
    """
    X_arr, y_arr = _as_design(X, y)
    lam = _check_penalty(lam)
    n, p = X_arr.shape

    x_mean = X_arr.mean(axis=0)
    y_mean = float(y_arr.mean())
    Xc = X_arr - x_mean
    yc = y_arr - y_mean
    gram = Xc.T @ Xc / n
    curvature = np.diag(gram).copy()

    if beta_init is None:
        beta = np.zeros(p)
    else:
        beta = np.array(beta_init, dtype=float).reshape(-1)
        if beta.shape[0] != p:
            raise dimension_mismatch_error("beta_init length", p, beta.shape[0])
    beta[curvature == 0.0] = 0.0
    all_coords = np.flatnonzero(curvature > 0.0)
    half_lam = 0.5 * lam

    resid = yc - Xc @ beta
    trace = [float(resid @ resid / n + lam * np.abs(beta).sum())]
    violations = _kkt_violations(-2.0 * (Xc.T @ resid) / n, beta, lam)
    violation = float(violations.max()) if p else 0.0
    converged = violation <= tol
    active_only = False
    n_iter = 0
    while not converged and n_iter < max_iter:
        n_iter += 1
        coords = np.flatnonzero(beta) if active_only else all_coords
        # (1/n) Xc' r, kept current through the Gram columns
        corr = Xc.T @ resid / n
        for j in coords:
            c = curvature[j]
            old = beta[j]
            z = corr[j] + c * old
            if z > half_lam:
                new = (z - half_lam) / c
            elif z < -half_lam:
                new = (z + half_lam) / c
            else:
                new = 0.0
            if new != old:
                corr -= gram[:, j] * (new - old)
                beta[j] = new

        resid = yc - Xc @ beta
        trace.append(float(resid @ resid / n + lam * np.abs(beta).sum()))
        violations = _kkt_violations(-2.0 * (Xc.T @ resid) / n, beta, lam)
        violation = float(violations.max())
        converged = violation <= tol
        active = beta != 0
        active_done = not active.any() or violations[active].max() <= tol
        active_only = not active_done

    if not converged:
        logger.warning(
            f"lasso did not converge in {max_iter} sweeps "
            f"(lambda={lam:.4g}, kkt={violation:.3e})"
        )
    return LassoFit(
        beta0=y_mean - float(x_mean @ beta),
        beta=beta,
        lambda_=lam,
        n_iter=n_iter,
        converged=converged,
        kkt_violation=violation,
        objective_trace=tuple(trace),
    )


def lasso_predict(fit: LassoFit, X_new: ArrayLike) -> np.ndarray:
    """Predictions beta0 + X_new beta."""
    X_arr = np.asarray(X_new, dtype=float)
    if X_arr.ndim == 1:
        X_arr = X_arr[None, :]
    if X_arr.shape[1] != fit.p:
        raise dimension_mismatch_error("X_new columns", fit.p, X_arr.shape[1])
    return fit.beta0 + X_arr @ fit.beta


def _check_descending(grid: np.ndarray) -> None:
    if grid.size == 0:
        raise InvalidInputError("lambda grid is empty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise InvalidInputError("lambda grid entries must be finite and >= 0")
    if np.any(np.diff(grid) > 0):
        raise InvalidInputError("lambda grid must be descending")


def lasso_path(
    X: ArrayLike,
    y: ArrayLike,
    lambda_grid: Sequence[float],
    tol: float = settings.lasso_tol,
    max_iter: int = settings.lasso_max_iter,
) -> List[LassoFit]:
    """Warm-started fits along a descending grid."""
    grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    _check_descending(grid)
    fits: List[LassoFit] = []
    beta: Optional[np.ndarray] = None
    for lam in grid:
        fit = lasso_fit(X, y, float(lam), tol=tol, max_iter=max_iter, beta_init=beta)
        beta = np.array(fit.beta)
        fits.append(fit)
    return fits


def lasso_cv(
    X: ArrayLike,
    y: ArrayLike,
    lambda_grid: Optional[Sequence[float]] = None,
    k: int = settings.cv_folds,
    seed: int = settings.cv_seed,
    tol: float = settings.lasso_tol,
    max_iter: int = settings.lasso_max_iter,
    cv_tol: float = settings.cv_tol,
) -> LassoCVResult:
    """Choose lambda by k-fold cross-validation.

    Folds come from a seeded shuffle of the row order. The selected penalty
    minimizes the mean held-out squared error; ties go to the larger lambda.
    Fold paths are solved to ``cv_tol``, the refit on all rows to ``tol``.
    """
    X_arr, y_arr = _as_design(X, y)
    n = X_arr.shape[0]
    if k < 2:
        raise InvalidInputError(f"need at least 2 folds, got {k}", {"k": k})
    if n < k:
        raise InvalidInputError(
            f"cannot split {n} rows into {k} folds", {"n": n, "k": k}
        )
    if lambda_grid is None:
        grid = default_lambda_grid(X_arr, y_arr)
    else:
        grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    _check_descending(grid)

    folds = KFold(n_splits=k, shuffle=True, random_state=seed)
    errors = np.zeros((k, grid.size))
    for f, (train_idx, test_idx) in enumerate(folds.split(X_arr)):
        fits = lasso_path(
            X_arr[train_idx], y_arr[train_idx], grid, tol=cv_tol, max_iter=max_iter
        )
        for m, fit in enumerate(fits):
            resid = y_arr[test_idx] - lasso_predict(fit, X_arr[test_idx])
            errors[f, m] = float(resid @ resid / resid.size)

    cv_errors = errors.mean(axis=0)
    best = int(np.argmin(cv_errors))
    ties = np.flatnonzero(cv_errors == cv_errors[best])
    if ties.size > 1:
        logger.debug(f"lasso CV tie over {ties.size} penalties; keeping the largest")
    best_lambda = float(grid[best])
    logger.debug(
        f"lasso CV: best lambda={best_lambda:.4g} (index {best}), "
        f"error={cv_errors[best]:.4g}"
    )
    return LassoCVResult(
        best_lambda=best_lambda,
        best_index=best,
        lambda_grid=grid,
        cv_errors=cv_errors,
        cv_std=errors.std(axis=0),
        n_folds=k,
        seed=seed,
        fit=lasso_fit(X_arr, y_arr, best_lambda, tol=tol, max_iter=max_iter),
    )
