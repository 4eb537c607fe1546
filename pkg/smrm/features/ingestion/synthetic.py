"""Synthetic datasets drawn from the model, with known ground truth."""

from typing import Tuple

import numpy as np
from scipy import linalg, optimize, special
from sklearn.metrics import roc_auc_score

from smrm.core.logging import logger
from smrm.features.core_types.schemas import Dataset, MaskedMatrix, ModelParams
from smrm.features.ingestion.errors import mask_retries_error
from smrm.features.ingestion.schemas import (
    MissingMechanism,
    PrecisionPattern,
    RecoveryReport,
    SyntheticSpec,
)


def sparse_precision(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Diagonally dominant precision matrix with the requested support."""
    q = spec.q
    K = np.zeros((q, q))
    if spec.precision_pattern is PrecisionPattern.CHAIN:
        pairs = [(l, l + 1) for l in range(q - 1)]
    else:
        upper = np.column_stack(np.triu_indices(q, k=1))
        chosen = rng.choice(upper.shape[0], size=spec.n_edges, replace=False)
        pairs = [tuple(int(v) for v in upper[i]) for i in np.sort(chosen)]
    for l, m in pairs:
        value = spec.edge_strength * rng.choice([-1.0, 1.0])
        K[l, m] = K[m, l] = value
    np.fill_diagonal(K, np.abs(K).sum(axis=1) + 1.0)
    return K / spec.noise_scale**2


def sparse_coefficients(
    spec: SyntheticSpec, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Intercepts and a p x q coefficient matrix with ``coef_density`` support."""
    b0 = rng.normal(size=spec.q)
    support = rng.random((spec.p, spec.q)) < spec.coef_density
    magnitude = rng.uniform(0.5, 1.5, size=(spec.p, spec.q)) * spec.coef_scale
    sign = rng.choice([-1.0, 1.0], size=(spec.p, spec.q))
    return b0, np.where(support, sign * magnitude, 0.0)


def gaussian_errors(K: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n rows i.i.d. N(0, K^-1), as Z L^-1 with K = L L'."""
    L = linalg.cholesky(K, lower=True)
    Z = rng.standard_normal((n, K.shape[0]))
    return linalg.solve_triangular(L, Z.T, lower=True, trans="T").T


def _mar_offset(score: np.ndarray, rate: float, strength: float) -> float:
    """Offset alpha with mean(sigmoid(alpha + strength * score)) = rate."""
    if rate <= 0.0:
        return -np.inf
    if rate >= 1.0:
        return np.inf

    def gap(alpha: float) -> float:
        return float(special.expit(alpha + strength * score).mean()) - rate

    return float(optimize.brentq(gap, -50.0, 50.0))


def draw_mask(
    Y: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator
) -> np.ndarray:
    """Observation mask (True = observed) under the spec's mechanism."""
    n, q = Y.shape
    if spec.mechanism is MissingMechanism.MCAR:
        return rng.random((n, q)) >= spec.missing_rate

    first = Y[:, 0]
    spread = first.std()
    score = (first - first.mean()) / spread if spread > 0 else np.zeros(n)
    alpha = _mar_offset(score, spec.missing_rate, spec.mar_strength)
    prob_missing = special.expit(alpha + spec.mar_strength * score)
    mask = np.ones((n, q), dtype=bool)
    mask[:, 1:] = rng.random((n, q - 1)) >= prob_missing[:, None]
    return mask


def generate_synthetic(spec: SyntheticSpec) -> Tuple[Dataset, ModelParams]:
    """Draw X, then Y = b0 + X B + E with E ~ N(0, K^-1), then the mask.

    The mask is redrawn while some response column is fully missing, up to
    ``spec.max_retries`` times.

    Returns:
        (dataset, truth)
    """
    rng = np.random.default_rng(spec.seed)
    K = sparse_precision(spec, rng)
    b0, B = sparse_coefficients(spec, rng)
    X = rng.standard_normal((spec.n, spec.p))
    Y = b0[None, :] + X @ B + gaussian_errors(K, spec.n, rng)
    truth = ModelParams(b0=b0, B=B, K=K)

    for attempt in range(spec.max_retries + 1):
        mask = draw_mask(Y, spec, rng)
        if np.all(mask.any(axis=0)):
            if attempt:
                logger.warning(f"synthetic mask accepted after {attempt} redraws")
            responses = MaskedMatrix(values=np.where(mask, Y, 0.0), mask=mask)
            logger.debug(
                f"synthetic data n={spec.n}, p={spec.p}, q={spec.q}: "
                f"missing ratio {responses.missing_ratio():.3f}"
            )
            return Dataset(X=X, Y=responses), truth
    raise mask_retries_error(spec.missing_rate, spec.max_retries + 1)


def recovery_report(
    truth: ModelParams, estimate: ModelParams, atol: float = 0.0
) -> RecoveryReport:
    """Support recovery of K and B plus coefficient RMSE.

    The AUC ranks |K_hat| off-diagonals against the true nonzero pattern; it
    is NaN when the truth has no edges or only edges.
    """
    upper = np.triu_indices(truth.q, k=1)
    true_support = truth.K[upper] != 0
    scores = np.abs(estimate.K[upper])
    if true_support.all() or not true_support.any():
        auc = float("nan")
    else:
        auc = float(roc_auc_score(true_support, scores))

    true_b = truth.B != 0
    est_b = np.abs(estimate.B) > atol
    hits = int(np.sum(true_b & est_b))
    precision = hits / int(est_b.sum()) if est_b.any() else 1.0
    recall = hits / int(true_b.sum()) if true_b.any() else 1.0
    return RecoveryReport(
        precision_auc=auc,
        true_edges=int(true_support.sum()),
        estimated_edges=int(np.sum(scores > atol)),
        coefficient_rmse=float(np.sqrt(np.mean((truth.B - estimate.B) ** 2))),
        support_precision=precision,
        support_recall=recall,
    )

