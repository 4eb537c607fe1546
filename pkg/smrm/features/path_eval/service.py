"""Train/test protocol: split, lasso baseline, penalty matrices, lambda1 paths.

Every path point is scored by the normalized test error

    mse_tilde = sum_l MSE_l / MSE_l^lasso,

which is exactly q (the number of evaluated responses) for the baseline
itself, so values below q beat the per-response lasso.
"""

import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from smrm.core.config import settings
from smrm.core.errors import InvalidInputError, SmrmError
from smrm.core.logging import logger
from smrm.features.core_types.schemas import Dataset, MaskedMatrix, SplitTag
from smrm.features.core_types.service import precision_to_correlation
from smrm.features.estimation.schemas import SmrmConfig, SmrmFit
from smrm.features.estimation.service import smrm_fit
from smrm.features.lasso.schemas import LassoFit
from smrm.features.lasso.service import lasso_cv, lasso_fit, lasso_predict
from smrm.features.path_eval.errors import (
    nonpositive_entry_error,
    perfect_fit_error,
    split_failed_error,
    too_few_observations_error,
)
from smrm.features.path_eval.schemas import (
    BaselineResult,
    EvalReport,
    EvaluationScale,
    Lambda2Matrix,
    Lambda2Mode,
    PathPoint,
    PathResult,
    ReferencePoints,
)


def train_size(n: int, ratio: float) -> int:
    """floor(ratio * n), guarded against representation error."""
    return int(math.floor(ratio * n + 1e-9))


def train_test_split(
    dataset: Dataset,
    ratio: float = settings.split_ratio,
    seed: int = settings.split_seed,
    max_retries: int = settings.split_max_retries,
) -> Dataset:
    """Tag floor(ratio * n) shuffled rows as training rows.

    Attempt ``k`` shuffles with ``default_rng([seed, k])``; a split whose
    training rows leave some response column fully missing is redrawn, up to
    ``max_retries`` times. The accepted attempt number is recorded on the
    returned dataset as ``split_retries``.
    """
    if not 0.0 < ratio < 1.0:
        raise InvalidInputError(
            f"split ratio must lie in (0, 1), got {ratio}", {"ratio": ratio}
        )
    n = dataset.n
    n_train = train_size(n, ratio)
    if n_train < 1 or n_train >= n:
        raise InvalidInputError(
            f"ratio {ratio} on {n} rows leaves an empty train or test set",
            {"n": n, "ratio": ratio, "n_train": n_train},
        )

    missing: List[str] = []
    for attempt in range(max_retries + 1):
        rng = np.random.default_rng([seed, attempt])
        train_rows = np.sort(rng.permutation(n)[:n_train])
        missing = dataset.Y.take_rows(train_rows).fully_missing_columns()
        if not missing:
            tags = [SplitTag.TEST] * n
            for i in train_rows:
                tags[i] = SplitTag.TRAIN
            if attempt:
                logger.warning(
                    f"train/test split accepted after {attempt} redraws (seed={seed})"
                )
            return Dataset(
                X=dataset.X,
                Y=dataset.Y,
                predictor_names=dataset.predictor_names,
                split=tuple(tags),
                split_retries=attempt,
            )
        logger.debug(f"split attempt {attempt}: training columns missing {missing}")
    raise split_failed_error(n, n_train, max_retries + 1, missing)


def _tile(row: np.ndarray, p: int) -> np.ndarray:
    return np.tile(row, (p, 1))


def build_lambda2_uniform(lambda_train: ArrayLike, r: float, p: int) -> Lambda2Matrix:
    """Entry (j, l) = r * lambda_train[l] for every predictor j."""
    base = np.asarray(lambda_train, dtype=float).reshape(-1)
    if np.any(base < 0) or not np.all(np.isfinite(base)):
        raise InvalidInputError("lambda_train entries must be finite and >= 0")
    if p < 1:
        raise InvalidInputError(f"need at least one predictor, got p={p}", {"p": p})
    return Lambda2Matrix(
        values=_tile(r * base, p), base=base, r=r, mode=Lambda2Mode.UNIFORM
    )


def adjusted_lambda2(
    lambda_train: ArrayLike, a: ArrayLike, r: float, p: int
) -> Lambda2Matrix:
    """Entry (j, l) = r * lambda_train[l] * a[l]."""
    base = np.asarray(lambda_train, dtype=float).reshape(-1)
    a_arr = np.asarray(a, dtype=float).reshape(-1)
    if a_arr.shape != base.shape:
        raise InvalidInputError("a and lambda_train must have the same length")
    if np.any(base < 0) or np.any(a_arr <= 0):
        raise InvalidInputError("lambda_train must be >= 0 and a must be > 0")
    return Lambda2Matrix(
        values=_tile(r * base * a_arr, p),
        base=base,
        r=r,
        mode=Lambda2Mode.ADJUSTED,
        a=a_arr,
    )


def _mse(resid: np.ndarray) -> float:
    return float(resid @ resid / resid.size)


def build_lambda2_adjusted(
    X_train: ArrayLike,
    Y_train: MaskedMatrix,
    lambda_train: ArrayLike,
    r: float,
    tol: float = settings.lasso_tol,
    max_iter: int = settings.lasso_max_iter,
) -> Tuple[Lambda2Matrix, np.ndarray]:
    """Scale each penalty column by the inverse training MSE of its lasso fit.

    Returns:
        (Lambda2Matrix, a) with a[l] = 1 / t_l
    """
    X_arr = np.asarray(X_train, dtype=float)
    base = np.asarray(lambda_train, dtype=float).reshape(-1)
    if base.shape[0] != Y_train.n_cols:
        raise InvalidInputError("lambda_train needs one entry per response")
    a = np.zeros(Y_train.n_cols)
    for l, name in enumerate(Y_train.column_names):
        rows, y = Y_train.observed_column(l)
        if rows.size < 2:
            raise too_few_observations_error(name, int(rows.size), 2)
        fit = lasso_fit(X_arr[rows], y, float(base[l]), tol=tol, max_iter=max_iter)
        t = _mse(y - lasso_predict(fit, X_arr[rows]))
        if t <= 0.0:
            raise perfect_fit_error(name, float(base[l]))
        a[l] = 1.0 / t
    matrix = adjusted_lambda2(base, a, r, X_arr.shape[1])
    return matrix, a


def lambda2_for(
    baseline: BaselineResult, r: float, p: int, mode: Lambda2Mode
) -> Lambda2Matrix:
    """Penalty matrix for one r from a fitted baseline."""
    if mode is Lambda2Mode.ADJUSTED:
        return adjusted_lambda2(baseline.lambda_train, baseline.a, r, p)
    return build_lambda2_uniform(baseline.lambda_train, r, p)


def lambda1_grid(
    low: float = settings.lambda1_low,
    high: float = settings.lambda1_high,
    n_points: int = settings.lambda1_points,
) -> np.ndarray:
    """Log-equispaced grid descending from ``high`` to ``low``."""
    if not (np.isfinite(low) and np.isfinite(high)) or not 0.0 < low < high:
        raise InvalidInputError(
            f"lambda1 grid needs 0 < low < high, got low={low}, high={high}",
            {"low": low, "high": high},
        )
    if n_points < 2:
        raise InvalidInputError(
            f"lambda1 grid needs at least 2 points, got {n_points}",
            {"n_points": n_points},
        )
    return np.geomspace(high, low, n_points)


def log_transform(Y: MaskedMatrix) -> MaskedMatrix:
    """Elementwise log of the observed entries; the mask is unchanged."""
    bad = Y.mask & (Y.values <= 0)
    if np.any(bad):
        i, l = (int(v) for v in np.argwhere(bad)[0])
        raise nonpositive_entry_error(i, Y.column_names[l], float(Y.values[i, l]))
    return Y.with_values(np.where(Y.mask, np.log(np.where(Y.mask, Y.values, 1.0)), 0.0))


def exp_back(predictions: ArrayLike) -> np.ndarray:
    return np.exp(np.asarray(predictions, dtype=float))


def fit_baseline(
    dataset: Dataset,
    k: int = settings.cv_folds,
    seed: int = settings.cv_seed,
    lambda_grid: Optional[Sequence[float]] = None,
    tol: float = settings.lasso_tol,
    max_iter: int = settings.lasso_max_iter,
) -> BaselineResult:
    """Per-response lasso on the observed training rows of each response.

    lambda_train[l] is chosen by k-fold CV, t_l is the training MSE of the
    refit at that penalty, a_l = 1 / t_l and test_mse[l] is the error on the
    observed test rows (NaN when there are none).
    """
    train = dataset.train()
    test = dataset.test()
    names = dataset.response_names
    lambdas, train_mse, test_mse = [], [], []
    fits, cvs = [], []
    for l, name in enumerate(names):
        rows, y = train.Y.observed_column(l)
        needed = max(k, 2)
        if rows.size < needed:
            raise too_few_observations_error(name, int(rows.size), needed)
        cv = lasso_cv(
            train.X[rows],
            y,
            lambda_grid=lambda_grid,
            k=k,
            seed=seed,
            tol=tol,
            max_iter=max_iter,
        )
        t = _mse(y - lasso_predict(cv.fit, train.X[rows]))
        if t <= 0.0:
            raise perfect_fit_error(name, cv.best_lambda)
        test_rows, y_test = test.Y.observed_column(l)
        mse = (
            _mse(y_test - lasso_predict(cv.fit, test.X[test_rows]))
            if test_rows.size
            else float("nan")
        )
        logger.info(
            f"baseline {name}: lambda_train={cv.best_lambda:.4g}, "
            f"train MSE={t:.4g}, test MSE={mse:.4g}"
        )
        lambdas.append(cv.best_lambda)
        train_mse.append(t)
        test_mse.append(mse)
        fits.append(cv.fit)
        cvs.append(cv)

    return BaselineResult(
        response_names=names,
        lambda_train=np.asarray(lambdas),
        train_mse=np.asarray(train_mse),
        a=1.0 / np.asarray(train_mse),
        test_mse=np.asarray(test_mse),
        fits=tuple(fits),
        cv=tuple(cvs),
        n_folds=k,
        cv_seed=seed,
    )


def evaluate_predictions(
    Y_test: MaskedMatrix,
    predictions: ArrayLike,
    lasso_reference_mse: ArrayLike,
    scale: EvaluationScale = EvaluationScale.RAW,
    lambda1: Optional[float] = None,
    r: Optional[float] = None,
    correlation_matrix: Optional[np.ndarray] = None,
) -> EvalReport:
    """Score predictions on the observed test entries only."""
    pred = np.asarray(predictions, dtype=float)
    if pred.shape != Y_test.shape:
        raise InvalidInputError(
            f"predictions shape {pred.shape} does not match {Y_test.shape}"
        )
    ref = np.asarray(lasso_reference_mse, dtype=float).reshape(-1)
    if ref.shape[0] != Y_test.n_cols:
        raise InvalidInputError("lasso reference needs one MSE per response")

    q = Y_test.n_cols
    mse = np.full(q, np.nan)
    tilde = np.full(q, np.nan)
    excluded: List[str] = []
    total = 0.0
    for l, name in enumerate(Y_test.column_names):
        rows = np.flatnonzero(Y_test.mask[:, l])
        if rows.size == 0:
            excluded.append(name)
            continue
        if not ref[l] > 0:
            raise InvalidInputError(
                f"lasso reference MSE of {name} must be > 0, got {ref[l]}",
                {"response": name, "reference": float(ref[l])},
            )
        mse[l] = _mse(Y_test.values[rows, l] - pred[rows, l])
        tilde[l] = mse[l] / ref[l]
        total += tilde[l]
    if excluded:
        logger.warning(f"responses without observed test entries: {excluded}")

    q_effective = q - len(excluded)
    return EvalReport(
        response_names=Y_test.column_names,
        per_response_mse_lasso=ref,
        per_response_mse_smrm=mse,
        per_response_mse_tilde=tilde,
        mse_tilde_lasso=float(q_effective),
        mse_tilde_smrm=float(total),
        q_effective=q_effective,
        excluded_responses=tuple(excluded),
        lambda1=lambda1,
        r=r,
        scale=scale,
        correlation_matrix=correlation_matrix,
    )


def evaluate(
    model: Union[SmrmFit, BaselineResult, Sequence[LassoFit]],
    test: Dataset,
    lasso_reference_mse: ArrayLike,
    scale: EvaluationScale = EvaluationScale.RAW,
    r: Optional[float] = None,
) -> EvalReport:
    """Evaluate an SMRM fit or a set of per-response lasso fits on test rows."""
    if isinstance(model, SmrmFit):
        return evaluate_predictions(
            test.Y,
            model.params.predict(test.X),
            lasso_reference_mse,
            scale=scale,
            lambda1=model.lambda1,
            r=r,
            correlation_matrix=precision_to_correlation(model.params.K),
        )
    if isinstance(model, BaselineResult):
        predictions = model.predict(test.X)
    else:
        predictions = np.column_stack([lasso_predict(fit, test.X) for fit in model])
    return evaluate_predictions(
        test.Y, predictions, lasso_reference_mse, scale=scale, r=r
    )


def run_path(
    dataset: Dataset,
    lambda2: Lambda2Matrix,
    grid: Sequence[float],
    reference_mse: Optional[ArrayLike] = None,
    config: Optional[SmrmConfig] = None,
    scale: EvaluationScale = EvaluationScale.RAW,
) -> PathResult:
    """Warm-started SMRM fits along a descending lambda1 grid.

    The first point starts from the default initialization, every later
    point from the previous fit. A point that raises a structured error is
    recorded with its error and the chain continues from the last fit.
    When the dataset carries a split, fits use the training rows and each
    point is evaluated on the test rows against ``reference_mse``.
    """
    grid_arr = np.asarray(grid, dtype=float).reshape(-1)
    if grid_arr.size == 0:
        raise InvalidInputError("lambda1 grid is empty")
    if np.any(np.diff(grid_arr) >= 0):
        raise InvalidInputError("lambda1 grid must be strictly descending")

    if dataset.split is None:
        train, test = dataset, None
    else:
        train, test = dataset.train(), dataset.test()
    if config is None:
        template = SmrmConfig(lambda1=float(grid_arr[0]), lambda2=lambda2.values)
    else:
        template = config.model_copy(update={"lambda2": lambda2.values})

    points: List[PathPoint] = []
    init = None
    for index, lam1 in enumerate(grid_arr):
        try:
            fit = smrm_fit(train, template.with_lambda1(float(lam1)), init=init)
        except SmrmError as exc:
            logger.warning(
                f"r={lambda2.r:g} point {index} (lambda1={lam1:.4g}) failed: {exc}"
            )
            points.append(
                PathPoint(index=index, lambda1=float(lam1), error=exc.to_record())
            )
            continue
        init = fit.params
        report = None
        if test is not None and reference_mse is not None:
            report = evaluate(fit, test, reference_mse, scale=scale, r=lambda2.r)
        points.append(
            PathPoint(index=index, lambda1=float(lam1), fit=fit, report=report)
        )
        message = (
            f"r={lambda2.r:g} point {index}: lambda1={lam1:.4g}, "
            f"mse_tilde={points[-1].mse_tilde:.4g}, EM iterations={fit.em_iters}"
        )
        if fit.converged:
            logger.info(message)
        else:
            logger.warning(message + " (not converged)")

    return PathResult(r=lambda2.r, lambda2=lambda2, points=tuple(points), scale=scale)


def run_sweep(
    dataset: Dataset,
    baseline: BaselineResult,
    r_values: Sequence[float],
    grid: Sequence[float],
    mode: Lambda2Mode = Lambda2Mode.UNIFORM,
    config: Optional[SmrmConfig] = None,
    scale: EvaluationScale = EvaluationScale.RAW,
    max_jobs: int = settings.max_jobs,
) -> List[PathResult]:
    """One warm-start chain per r, results in the order of ``r_values``."""
    from smrm.workers.tasks import PathTask, run_path_tasks

    tasks = [
        PathTask(
            dataset=dataset,
            lambda2=lambda2_for(baseline, float(r), dataset.p, mode),
            grid=tuple(float(v) for v in grid),
            reference_mse=baseline.test_mse,
            config=config,
            scale=scale,
        )
        for r in r_values
    ]
    return run_path_tasks(tasks, max_jobs=max_jobs)


def select_reference_points(path: PathResult) -> ReferencePoints:
    """Best grid point by mse_tilde, its two neighbours and the last point."""
    scores = path.mse_tilde
    if scores.size == 0 or np.all(np.isnan(scores)):
        raise InvalidInputError(
            f"path r={path.r:g} has no evaluated points", {"r": path.r}
        )
    best = int(np.nanargmin(scores))
    last = scores.size - 1
    return ReferencePoints(
        best=best,
        better1=max(best - 1, 0),
        better2=min(best + 1, last),
        last=last,
    )


def summarize_path(path: PathResult) -> pd.DataFrame:
    """One row per grid point with the curve data of the path."""
    rows = []
    for pt in path.points:
        row = {
            "r": path.r,
            "index": pt.index,
            "lambda1": pt.lambda1,
            "log_lambda1": math.log(pt.lambda1),
            "mse_tilde_smrm": pt.mse_tilde,
            "mse_tilde_lasso": (
                float("nan") if pt.report is None else pt.report.mse_tilde_lasso
            ),
            "em_iters": pt.em_iters,
            "converged": pt.converged,
            "failed": pt.failed,
            "objective": float("nan") if pt.fit is None else pt.fit.objective,
            "n_edges": (
                0
                if pt.fit is None
                else int(np.count_nonzero(np.triu(pt.fit.params.K, k=1)))
            ),
        }
        if pt.report is not None:
            for name, value in zip(
                pt.report.response_names, pt.report.per_response_mse_tilde
            ):
                row[f"tilde_{name}"] = float(value)
        rows.append(row)
    return pd.DataFrame(rows)
