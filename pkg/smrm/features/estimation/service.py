"""EM estimation of sparse (B-tilde, K) for responses with missing values.

Each EM iteration runs one E-step (conditional moments of the missing
responses), one coordinate-descent pass over B for fixed K and one graphical
lasso update of K for the new B. Both M-step updates decrease the surrogate
objective, so the observed-data objective never increases.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError, ObjectiveIncreaseError
from smrm.core.logging import logger
from smrm.features.core_types.errors import dimension_mismatch_error
from smrm.features.core_types.linalg import check_spd, soft_threshold, spd_logdet
from smrm.features.core_types.schemas import Dataset, MaskedMatrix, ModelParams
from smrm.features.core_types.service import group_rows_by_pattern
from smrm.features.estimation.schemas import EStepResult, SmrmConfig, SmrmFit
from smrm.features.glasso.schemas import GlassoResult
from smrm.features.glasso.service import glasso_fit


def _check_design(X_tilde: ArrayLike, n: int, p_plus_one: int) -> np.ndarray:
    X_arr = np.asarray(X_tilde, dtype=float)
    if X_arr.shape != (n, p_plus_one):
        raise dimension_mismatch_error("X_tilde shape", (n, p_plus_one), X_arr.shape)
    return X_arr


def penalty_value(params: ModelParams, lambda1: float, lambda2: np.ndarray) -> float:
    """lambda1 * sum_{l != l'} |k_ll'| + 2 * sum_{j,l} lambda2_jl |b_jl|."""
    K = params.K
    off = float(np.abs(K).sum() - np.abs(np.diag(K)).sum())
    return lambda1 * off + 2.0 * float(np.sum(lambda2 * np.abs(params.B)))


def e_step(X_tilde: ArrayLike, Y: MaskedMatrix, params: ModelParams) -> EStepResult:
    """Conditional first and second moments of the responses.

    Missing entries of row i are replaced by
    ``c_i = mu_mis - K_mm^-1 K_mo (y_obs - mu_obs)``; the expected scatter
    adds ``K_mm^-1`` on the missing block of every row.
    """
    n, q = Y.shape
    X_arr = _check_design(X_tilde, n, params.p + 1)
    if params.q != q:
        raise dimension_mismatch_error("response count", params.q, q)
    K = params.K
    check_spd(K, "K")

    mu = X_arr @ params.B_tilde
    Y_hat = np.where(Y.mask, Y.values, mu)
    correction = np.zeros((q, q))
    for part, rows in group_rows_by_pattern(Y.mask):
        mis, obs = part.mis, part.obs
        if mis.size == 0:
            continue
        factor = linalg.cho_factor(
            K[np.ix_(mis, mis)], lower=True, check_finite=False
        )
        cond_mean = mu[np.ix_(rows, mis)]
        if obs.size:
            resid = Y.values[np.ix_(rows, obs)] - mu[np.ix_(rows, obs)]
            shift = resid @ K[np.ix_(obs, mis)]
            cond_mean = cond_mean - linalg.cho_solve(
                factor, shift.T, check_finite=False
            ).T
        Y_hat[np.ix_(rows, mis)] = cond_mean
        cond_cov = linalg.cho_solve(factor, np.eye(mis.size), check_finite=False)
        correction[np.ix_(mis, mis)] += rows.size * 0.5 * (cond_cov + cond_cov.T)

    scatter = Y_hat.T @ Y_hat + correction
    return EStepResult(
        Y_hat=Y_hat,
        expected_scatter=0.5 * (scatter + scatter.T),
        conditional_cov_sum=correction,
    )


def expected_residual_scatter(
    X_tilde: ArrayLike, e_step_out: EStepResult, b0: ArrayLike, B: ArrayLike
) -> np.ndarray:
    """(1/n) E[(Y - X~B~)'(Y - X~B~)] from the E-step moments."""
    n = e_step_out.n
    b0_arr = np.asarray(b0, dtype=float).reshape(-1)
    B_arr = np.asarray(B, dtype=float)
    X_arr = _check_design(X_tilde, n, B_arr.shape[0] + 1)
    M = X_arr @ np.vstack([b0_arr[None, :], B_arr])
    resid = e_step_out.Y_hat - M
    S = (resid.T @ resid + e_step_out.conditional_cov_sum) / n
    return 0.5 * (S + S.T)


def m_step_B(
    X_tilde: ArrayLike,
    Y_hat: ArrayLike,
    K: ArrayLike,
    lambda2: ArrayLike,
    B_init: Optional[ArrayLike] = None,
    tol: float = settings.inner_tol,
    max_iter: int = settings.inner_max_iter,
) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficient update for fixed K.

    Minimizes tr[(1/n)(Y - X~B~)'(Y - X~B~) K] + 2 sum lambda2_jl |b_jl| by
    cyclic coordinate descent. The intercept is unpenalized and profiled out
    by centering, so b0 = ybar - xbar' B. Stops when the summed absolute
    coordinate change of a sweep is at most ``tol``.

    Returns:
        (b0, B)
    """
    Y_arr = np.asarray(Y_hat, dtype=float)
    n, q = Y_arr.shape
    X_full = np.asarray(X_tilde, dtype=float)
    if X_full.ndim != 2 or X_full.shape[0] != n:
        raise dimension_mismatch_error("X_tilde rows", n, X_full.shape)
    X = X_full[:, 1:]
    p = X.shape[1]
    K_arr = np.asarray(K, dtype=float)
    if K_arr.shape != (q, q):
        raise dimension_mismatch_error("K shape", (q, q), K_arr.shape)
    check_spd(K_arr, "K")
    lam = np.asarray(lambda2, dtype=float)
    if lam.shape != (p, q):
        raise dimension_mismatch_error("lambda2 shape", (p, q), lam.shape)

    x_mean = X.mean(axis=0)
    y_mean = Y_arr.mean(axis=0)
    Xc = X - x_mean
    Yc = Y_arr - y_mean
    Sxx = Xc.T @ Xc
    H = Xc.T @ Yc @ K_arr
    B = np.zeros((p, q)) if B_init is None else np.array(B_init, dtype=float)
    if B.shape != (p, q):
        raise dimension_mismatch_error("B_init shape", (p, q), B.shape)
    # (B K)' row by row; the gradient entry is Sxx[j] @ BK_t[l]
    BK_t = np.ascontiguousarray((B @ K_arr).T)
    curvature = np.outer(np.diag(Sxx), np.diag(K_arr))
    thresholds = n * lam

    for sweep in range(1, max_iter + 1):
        total_change = 0.0
        for j in range(p):
            sxx_j = Sxx[j]
            for l in range(q):
                a = curvature[j, l]
                old = B[j, l]
                if a == 0.0:
                    if old != 0.0:
                        raise InvalidInputError(
                            f"zero curvature for active coefficient ({j}, {l})",
                            {"predictor": j, "response": l},
                        )
                    continue
                u = H[j, l] - float(sxx_j @ BK_t[l]) + a * old
                new = soft_threshold(u, thresholds[j, l]) / a
                if new != old:
                    step = new - old
                    BK_t[:, j] += step * K_arr[:, l]
                    B[j, l] = new
                    total_change += abs(step)
        if total_change <= tol:
            break
    else:
        logger.debug(f"coefficient update stopped at {max_iter} sweeps")

    b0 = y_mean - x_mean @ B
    return b0, B


def m_step_K(
    X_tilde: ArrayLike,
    e_step_out: EStepResult,
    b0: ArrayLike,
    B: ArrayLike,
    lambda1: float,
    tol: float = settings.glasso_tol,
    max_iter: int = settings.glasso_max_iter,
    K_init: Optional[ArrayLike] = None,
) -> GlassoResult:
    """Precision update for fixed B-tilde.

    Runs the graphical lasso on the expected residual covariance, which uses
    the full second moments of the missing entries rather than Y_hat'Y_hat.
    """
    S = expected_residual_scatter(X_tilde, e_step_out, b0, B)
    return glasso_fit(S, lambda1, tol=tol, max_iter=max_iter, K_init=K_init)


def penalized_objective(
    X_tilde: ArrayLike,
    e_step_out: EStepResult,
    params: ModelParams,
    config: SmrmConfig,
) -> float:
    """Surrogate objective tr(S K) - log|K| + penalties.

    S is the expected residual covariance given the E-step moments.
    """
    S = expected_residual_scatter(X_tilde, e_step_out, params.b0, params.B)
    return (
        float(np.sum(S * params.K))
        - spd_logdet(params.K)
        + penalty_value(params, config.lambda1, config.lambda2)
    )


def observed_objective(
    X_tilde: ArrayLike,
    Y: MaskedMatrix,
    params: ModelParams,
    config: SmrmConfig,
) -> float:
    """Penalized observed-data negative log-likelihood, scaled like the surrogate.

    (1/n) sum_i [r_obs' Sigma_oo^-1 r_obs + log|Sigma_oo|] + penalties, where
    r_obs are the observed residuals of row i. Rows without observations
    contribute nothing.
    """
    n, q = Y.shape
    X_arr = _check_design(X_tilde, n, params.p + 1)
    mu = X_arr @ params.B_tilde
    sigma = params.sigma
    total = 0.0
    for part, rows in group_rows_by_pattern(Y.mask):
        obs = part.obs
        if obs.size == 0:
            continue
        factor = linalg.cho_factor(
            sigma[np.ix_(obs, obs)], lower=True, check_finite=False
        )
        resid = Y.values[np.ix_(rows, obs)] - mu[np.ix_(rows, obs)]
        solved = linalg.cho_solve(factor, resid.T, check_finite=False)
        total += float(np.sum(resid.T * solved))
        total += rows.size * 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return total / n + penalty_value(params, config.lambda1, config.lambda2)


def default_init(X_tilde: ArrayLike, Y: MaskedMatrix) -> ModelParams:
    """b0 = observed column means, B = 0, K = diag(1 / observed variances)."""
    X_arr = np.asarray(X_tilde, dtype=float)
    p = X_arr.shape[1] - 1
    q = Y.n_cols
    b0 = np.zeros(q)
    precision = np.ones(q)
    for l in range(q):
        _, values = Y.observed_column(l)
        if values.size == 0:
            continue
        b0[l] = float(values.mean())
        variance = float(values.var())
        if variance > 0:
            precision[l] = 1.0 / variance
        else:
            logger.warning(
                f"response {Y.column_names[l]} has no observed variance; "
                "initial precision set to 1"
            )
    return ModelParams(b0=b0, B=np.zeros((p, q)), K=np.diag(precision))


def smrm_fit(
    dataset: Dataset, config: SmrmConfig, init: Optional[ModelParams] = None
) -> SmrmFit:
    """Run the EM loop until sum |B^(m+1) - B^(m)| < epsilon.

    Args:
        dataset: training rows (X complete, Y masked)
        config: penalties and solver controls
        init: optional starting parameters (warm start)

    Returns:
        SmrmFit with the final parameters, imputed responses and traces

    Raises:
        ObjectiveIncreaseError: the observed-data objective went up by more
            than ``config.descent_tolerance`` (relative)
        NotPositiveDefiniteError: an iterate of K lost definiteness
    """
    Y = dataset.Y.validate_columns()
    X_tilde = dataset.x_tilde
    p, q = dataset.p, dataset.q
    if config.lambda2.shape != (p, q):
        raise dimension_mismatch_error("lambda2 shape", (p, q), config.lambda2.shape)

    params = init if init is not None else default_init(X_tilde, Y)
    if (params.p, params.q) != (p, q):
        raise dimension_mismatch_error("init shape", (p, q), (params.p, params.q))

    objective_trace = [observed_objective(X_tilde, Y, params, config)]
    surrogate_trace = []
    delta_trace = []
    converged = False
    em_iters = 0

    for em_iters in range(1, config.max_em_iter + 1):
        estep = e_step(X_tilde, Y, params)
        b0, B = m_step_B(
            X_tilde,
            estep.Y_hat,
            params.K,
            config.lambda2,
            B_init=params.B,
            tol=config.inner_tol,
            max_iter=config.inner_max_iter,
        )
        glasso = m_step_K(
            X_tilde,
            estep,
            b0,
            B,
            config.lambda1,
            tol=config.glasso_tol,
            max_iter=config.glasso_max_iter,
            K_init=params.K,
        )
        candidate = ModelParams(b0=b0, B=B, K=glasso.K)
        kept = ModelParams(b0=b0, B=B, K=params.K)
        surrogate_new = penalized_objective(X_tilde, estep, candidate, config)
        surrogate_kept = penalized_objective(X_tilde, estep, kept, config)
        if surrogate_new > surrogate_kept:
            logger.debug(
                f"EM {em_iters}: precision update did not decrease the surrogate; "
                "keeping the previous K"
            )
            candidate, surrogate_new = kept, surrogate_kept

        objective = observed_objective(X_tilde, Y, candidate, config)
        previous = objective_trace[-1]
        if objective > previous + config.descent_tolerance * max(1.0, abs(previous)):
            raise ObjectiveIncreaseError(
                f"observed objective increased from {previous:.10g} "
                f"to {objective:.10g} at EM iteration {em_iters}",
                {"iteration": em_iters, "previous": previous, "current": objective},
            )

        delta = float(np.abs(candidate.B - params.B).sum())
        params = candidate
        objective_trace.append(objective)
        surrogate_trace.append(surrogate_new)
        delta_trace.append(delta)
        logger.debug(
            f"EM {em_iters}: objective={objective:.10g}, sum|dB|={delta:.3e}, "
            f"glasso sweeps={glasso.n_iter}"
        )
        if delta < config.epsilon:
            converged = True
            break

    if not converged:
        logger.warning(
            f"EM did not converge in {config.max_em_iter} iterations "
            f"(lambda1={config.lambda1:.4g}, last sum|dB|={delta_trace[-1]:.3e})"
        )

    final = e_step(X_tilde, Y, params)
    return SmrmFit(
        params=params,
        objective_trace=tuple(objective_trace),
        surrogate_trace=tuple(surrogate_trace),
        delta_trace=tuple(delta_trace),
        em_iters=em_iters,
        converged=converged,
        Y_imputed=final.Y_hat,
        lambda1=config.lambda1,
    )


def predict(fit: SmrmFit, X: ArrayLike) -> np.ndarray:
    """Complete predictions b0 + X B for new rows."""
    return fit.params.predict(X)
