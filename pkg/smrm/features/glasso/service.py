"""Graphical lasso by block coordinate descent over columns.

Minimizes tr(S K) - log|K| + lambda1 * sum_{l != l'} |K_ll'| with an
unpenalized diagonal. The penalty weight applies to every ordered pair, so
each unordered pair carries 2 * lambda1.
"""

from typing import List, Optional

import numpy as np
from numpy.typing import ArrayLike

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError, UnboundedProblemError
from smrm.core.logging import logger
from smrm.features.core_types.errors import dimension_mismatch_error, non_finite_error
from smrm.features.core_types.linalg import (
    SYMMETRY_RTOL,
    check_spd,
    is_spd,
    soft_threshold,
    spd_inverse,
    spd_logdet,
)
from smrm.features.glasso.schemas import GlassoResult


def _offdiag_l1(K: np.ndarray) -> float:
    return float(np.abs(K).sum() - np.abs(np.diag(K)).sum())


def glasso_objective(S: ArrayLike, K: ArrayLike, lambda1: float) -> float:
    """tr(S K) - log|K| + lambda1 * sum_{l != l'} |K_ll'|; inf when K is not PD."""
    S_arr = np.asarray(S, dtype=float)
    K_arr = np.asarray(K, dtype=float)
    if not is_spd(K_arr):
        return float("inf")
    return float(
        np.sum(S_arr * K_arr) - spd_logdet(K_arr) + lambda1 * _offdiag_l1(K_arr)
    )


def glasso_duality_gap(S: ArrayLike, K: ArrayLike, lambda1: float) -> float:
    """tr(S K) - q + lambda1 * sum_{l != l'} |K_ll'|."""
    S_arr = np.asarray(S, dtype=float)
    K_arr = np.asarray(K, dtype=float)
    return float(
        np.sum(S_arr * K_arr) - K_arr.shape[0] + lambda1 * _offdiag_l1(K_arr)
    )


def _check_covariance(S: ArrayLike) -> np.ndarray:
    S_arr = np.asarray(S, dtype=float)
    if S_arr.ndim != 2 or S_arr.shape[0] != S_arr.shape[1]:
        raise dimension_mismatch_error("S shape", "square matrix", S_arr.shape)
    if not np.all(np.isfinite(S_arr)):
        raise non_finite_error("S")
    scale = float(np.max(np.abs(S_arr))) if S_arr.size else 0.0
    if float(np.max(np.abs(S_arr - S_arr.T), initial=0.0)) > SYMMETRY_RTOL * scale:
        raise InvalidInputError("S must be symmetric")
    if np.any(np.diag(S_arr) <= 0):
        raise UnboundedProblemError(
            "S has a nonpositive diagonal entry; the unpenalized diagonal "
            "makes the problem unbounded",
            {"diagonal": np.diag(S_arr).tolist()},
        )
    return 0.5 * (S_arr + S_arr.T)


def _lasso_gram(
    V: np.ndarray,
    s: np.ndarray,
    lam: float,
    beta: np.ndarray,
    tol: float,
    max_iter: int,
) -> np.ndarray:
    """Minimize 0.5 b'Vb - s'b + lam ||b||_1 by coordinate descent."""
    Vb = V @ beta
    for _ in range(max_iter):
        max_step = 0.0
        for k in range(beta.shape[0]):
            old = beta[k]
            r = s[k] - Vb[k] + V[k, k] * old
            new = soft_threshold(r, lam) / V[k, k]
            if new != old:
                Vb += V[:, k] * (new - old)
                beta[k] = new
                max_step = max(max_step, abs(new - old))
        if max_step <= tol:
            break
    return beta


def _assemble_precision(W: np.ndarray, betas: List[np.ndarray]) -> np.ndarray:
    q = W.shape[0]
    K = np.zeros((q, q))
    for j in range(q):
        others = np.arange(q) != j
        beta = betas[j]
        denom = W[j, j] - float(W[others, j] @ beta)
        K[j, j] = 1.0 / denom if denom > 0 else np.inf
        K[others, j] = -beta * K[j, j]
    return 0.5 * (K + K.T)


def glasso_fit(
    S: ArrayLike,
    lambda1: float,
    tol: float = settings.glasso_tol,
    max_iter: int = settings.glasso_max_iter,
    K_init: Optional[ArrayLike] = None,
    inner_tol: float = settings.glasso_inner_tol,
    inner_max_iter: int = settings.glasso_inner_max_iter,
) -> GlassoResult:
    """Estimate a sparse precision matrix from a covariance input.

    Args:
        S: q x q symmetric covariance with positive diagonal
        lambda1: off-diagonal penalty per ordered pair (>= 0)
        tol: stop when the mean absolute change of the covariance iterate
            is at most tol * mean|S_offdiag|
        max_iter: maximum number of outer sweeps
        K_init: optional precision used to warm-start column subproblems
        inner_tol: coordinate-change tolerance of each column lasso
        inner_max_iter: sweep cap of each column lasso

    Returns:
        GlassoResult with K, Sigma = K^-1 and the per-sweep objective
    """
    S_arr = _check_covariance(S)
    if not np.isfinite(lambda1) or lambda1 < 0:
        raise InvalidInputError(
            f"lambda1 must be finite and >= 0, got {lambda1}", {"lambda1": lambda1}
        )
    q = S_arr.shape[0]

    if q == 1 or lambda1 == 0.0:
        try:
            check_spd(S_arr, "S")
        except Exception:
            raise UnboundedProblemError(
                "S is rank-deficient and lambda1 = 0; the problem is unbounded",
                {"lambda1": lambda1},
            )
        K = spd_inverse(S_arr, "S")
        return GlassoResult(
            K=K,
            Sigma=S_arr,
            lambda1=lambda1,
            n_iter=0,
            converged=True,
            duality_gap=glasso_duality_gap(S_arr, K, lambda1),
            objective_trace=(glasso_objective(S_arr, K, lambda1),),
        )

    indices = np.arange(q)
    W = 0.95 * S_arr
    np.fill_diagonal(W, np.diag(S_arr))

    betas: List[np.ndarray] = []
    for j in range(q):
        if K_init is None:
            betas.append(np.zeros(q - 1))
        else:
            K0 = np.asarray(K_init, dtype=float)
            if K0.shape != (q, q):
                raise dimension_mismatch_error("K_init shape", (q, q), K0.shape)
            betas.append(-K0[indices != j, j] / K0[j, j])

    off_scale = float(np.abs(S_arr).sum() - np.abs(np.diag(S_arr)).sum()) / (
        q * (q - 1)
    )
    threshold = tol * off_scale
    trace: List[float] = []
    converged = False
    n_iter = 0
    K = np.diag(1.0 / np.diag(S_arr))

    for n_iter in range(1, max_iter + 1):
        W_old = W.copy()
        for j in range(q):
            others = indices != j
            W11 = W[np.ix_(others, others)]
            beta = _lasso_gram(
                W11, S_arr[others, j], lambda1, betas[j], inner_tol, inner_max_iter
            )
            betas[j] = beta
            w12 = W11 @ beta
            W[others, j] = w12
            W[j, others] = w12
        K = _assemble_precision(W, betas)
        trace.append(glasso_objective(S_arr, K, lambda1))
        change = float(np.mean(np.abs(W - W_old)))
        logger.debug(
            f"glasso sweep {n_iter}: objective={trace[-1]:.8g}, change={change:.3e}"
        )
        if change <= threshold:
            converged = True
            break

    if not is_spd(K):
        logger.warning("glasso precision lost definiteness; using the inverse iterate")
        K = spd_inverse(0.5 * (W + W.T), "Sigma")
        trace.append(glasso_objective(S_arr, K, lambda1))
    if not converged:
        logger.debug(f"glasso stopped after {max_iter} sweeps without converging")

    return GlassoResult(
        K=K,
        Sigma=spd_inverse(K, "K"),
        lambda1=lambda1,
        n_iter=n_iter,
        converged=converged,
        duality_gap=glasso_duality_gap(S_arr, K, lambda1),
        objective_trace=tuple(trace),
    )
