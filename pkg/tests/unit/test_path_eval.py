"""Unit tests for the split, baseline, penalty matrices and lambda1 paths."""

import numpy as np
import pytest

import smrm.features.path_eval.service as path_eval
from smrm.core.errors import InvalidInputError, SplitError
from smrm.features.core_types.schemas import Dataset, MaskedMatrix, SplitTag
from smrm.features.estimation.schemas import SmrmConfig
from smrm.features.estimation.service import smrm_fit
from smrm.features.path_eval.schemas import (
    EvalReport,
    EvaluationScale,
    Lambda2Matrix,
    Lambda2Mode,
    PathPoint,
    PathResult,
)
from smrm.features.path_eval.service import (
    adjusted_lambda2,
    build_lambda2_adjusted,
    build_lambda2_uniform,
    evaluate,
    evaluate_predictions,
    exp_back,
    fit_baseline,
    lambda1_grid,
    lambda2_for,
    log_transform,
    run_path,
    run_sweep,
    select_reference_points,
    summarize_path,
    train_size,
    train_test_split,
)


@pytest.fixture
def split_dataset(synthetic_missing):
    dataset, _ = synthetic_missing
    return train_test_split(dataset, 0.8, seed=0)


@pytest.fixture
def baseline(split_dataset):
    return fit_baseline(split_dataset, k=5, seed=0)


def _complete(n, q=2, p=1):
    return Dataset(
        X=np.arange(n * p, dtype=float).reshape(n, p),
        Y=MaskedMatrix.from_nan(np.ones((n, q))),
    )


def _scored_path(scores):
    points = []
    for index, score in enumerate(scores):
        report = EvalReport(
            response_names=("y1",),
            per_response_mse_lasso=[1.0],
            per_response_mse_smrm=[score],
            per_response_mse_tilde=[score],
            mse_tilde_lasso=1.0,
            mse_tilde_smrm=score,
            q_effective=1,
        )
        points.append(PathPoint(index=index, lambda1=1.0 / (index + 1), report=report))
    lambda2 = build_lambda2_uniform([0.1], 1.0, 1)
    return PathResult(r=1.0, lambda2=lambda2, points=tuple(points))


class TestTrainTestSplit:
    """Test cases for the seeded train/test split."""

    @pytest.mark.parametrize("n, n_train", [(114, 91), (2, 1), (10, 8), (5, 4)])
    def test_train_size(self, n, n_train):
        assert train_size(n, 0.8) == n_train

    def test_sizes_and_tags(self):
        split = train_test_split(_complete(114), 0.8, seed=3)

        assert all(isinstance(tag, SplitTag) for tag in split.split)
        assert sum(tag is SplitTag.TRAIN for tag in split.split) == 91
        assert sum(tag is SplitTag.TEST for tag in split.split) == 23
        assert len(split.train().X) == 91
        assert split.split_retries == 0

    def test_deterministic(self):
        first = train_test_split(_complete(50), 0.8, seed=9)
        second = train_test_split(_complete(50), 0.8, seed=9)
        other = train_test_split(_complete(50), 0.8, seed=10)

        assert first.split == second.split
        assert first.split != other.split

    def test_redraws_until_columns_observed(self):
        """A column observed in one row forces that row into training."""
        n, n_train, seed = 10, 5, 4
        values = np.ones((n, 2))
        values[1:, 1] = np.nan
        dataset = Dataset(X=np.zeros((n, 1)), Y=MaskedMatrix.from_nan(values))
        expected = next(
            k
            for k in range(100)
            if 0 in np.random.default_rng([seed, k]).permutation(n)[:n_train]
        )

        split = train_test_split(dataset, 0.5, seed=seed)

        assert split.split[0] is SplitTag.TRAIN
        assert split.split_retries == expected

    def test_split_failure(self):
        """No split of two complementary rows keeps both columns in training."""
        values = np.array([[1.0, np.nan], [np.nan, 1.0]])
        dataset = Dataset(X=np.zeros((2, 1)), Y=MaskedMatrix.from_nan(values))

        with pytest.raises(SplitError) as exc:
            train_test_split(dataset, 0.5, seed=0, max_retries=3)
        assert exc.value.details["attempts"] == 4

    def test_empty_side_rejected(self):
        with pytest.raises(InvalidInputError):
            train_test_split(_complete(3), 0.2)


class TestLambda2:
    """Test cases for the coefficient penalty matrices."""

    def test_uniform(self):
        matrix = build_lambda2_uniform([0.1, 0.2], 2.0, 3)

        np.testing.assert_allclose(matrix.values, [[0.2, 0.4]] * 3)
        assert (matrix.p, matrix.q) == (3, 2)
        np.testing.assert_allclose(matrix.row, [0.2, 0.4])

    def test_adjusted(self):
        """Dividing the adjusted matrix by a recovers the uniform one."""
        a = np.array([2.0, 0.5])
        adjusted = adjusted_lambda2([0.1, 0.2], a, 2.0, 3)
        uniform = build_lambda2_uniform([0.1, 0.2], 2.0, 3)

        np.testing.assert_allclose(adjusted.values, [[0.4, 0.2]] * 3)
        np.testing.assert_allclose(adjusted.values / a, uniform.values)
        assert adjusted.mode is Lambda2Mode.ADJUSTED

    def test_zero_multiplier_rejected(self):
        with pytest.raises(InvalidInputError):
            build_lambda2_uniform([0.1, 0.2], 0.0, 3)

    def test_negative_multiplier_rejected(self):
        with pytest.raises(InvalidInputError):
            build_lambda2_uniform([0.1, 0.2], -1.0, 3)

    def test_columns_must_be_constant(self):
        with pytest.raises(InvalidInputError):
            Lambda2Matrix(values=[[0.1], [0.2]], base=[0.1], r=1.0)

    def test_adjusted_from_training_fits(self, split_dataset, baseline):
        train = split_dataset.train()

        matrix, a = build_lambda2_adjusted(
            train.X, train.Y, baseline.lambda_train, 0.5
        )

        np.testing.assert_allclose(a, baseline.a, rtol=1e-6)
        np.testing.assert_allclose(
            matrix.values[0], 0.5 * baseline.lambda_train * a, rtol=1e-12
        )

    def test_lambda2_for_mode(self, baseline):
        uniform = lambda2_for(baseline, 1.0, 4, Lambda2Mode.UNIFORM)
        adjusted = lambda2_for(baseline, 1.0, 4, Lambda2Mode.ADJUSTED)

        np.testing.assert_allclose(adjusted.values, uniform.values * baseline.a)


class TestLambda1Grid:
    """Test cases for the log-spaced lambda1 grid."""

    def test_descending_log_grid(self):
        grid = lambda1_grid(0.01, 1.0, 3)

        np.testing.assert_allclose(grid, [1.0, 0.1, 0.01])

    def test_default_grid(self):
        grid = lambda1_grid()

        assert grid.size == 200
        assert grid[0] == pytest.approx(1.0)
        assert grid[-1] == pytest.approx(6.5e-3)

    @pytest.mark.parametrize(
        "low, high, n_points", [(1.0, 0.1, 5), (0.0, 1.0, 5), (0.1, 1.0, 1)]
    )
    def test_invalid(self, low, high, n_points):
        with pytest.raises(InvalidInputError):
            lambda1_grid(low, high, n_points)


class TestScale:
    """Test cases for the log modeling scale."""

    def test_log_transform(self):
        Y = MaskedMatrix.from_nan([[1.0, np.nan], [np.e, 2.0]])

        logged = log_transform(Y)

        assert logged.values[0, 0] == 0.0
        assert logged.values[1, 0] == pytest.approx(1.0)
        np.testing.assert_array_equal(logged.mask, Y.mask)
        np.testing.assert_allclose(exp_back(logged.values)[Y.mask], Y.values[Y.mask])

    def test_nonpositive_rejected(self):
        Y = MaskedMatrix.from_nan([[1.0, 0.0]], ["a", "b"])

        with pytest.raises(InvalidInputError) as exc:
            log_transform(Y)
        assert exc.value.details["column"] == "b"


class TestEvaluation:
    """Test cases for test-set scoring."""

    def test_perfect_predictions(self):
        Y = MaskedMatrix.from_nan([[1.0, 2.0], [3.0, np.nan]])

        report = evaluate_predictions(Y, [[1.0, 2.0], [3.0, 9.0]], [1.0, 1.0])

        assert report.mse_tilde_smrm == 0.0
        assert report.mse_tilde_lasso == 2.0

    def test_ratio(self):
        """An MSE of 2 against a reference of 4 scores 0.5."""
        Y = MaskedMatrix.from_nan([[0.0], [0.0]])

        report = evaluate_predictions(Y, [[2.0], [0.0]], [4.0])

        assert report.per_response_mse_smrm[0] == 2.0
        assert report.mse_tilde_smrm == 0.5

    def test_excluded_response(self):
        Y = MaskedMatrix.from_nan([[1.0, np.nan], [2.0, np.nan]], ["a", "b"])

        report = evaluate_predictions(Y, np.zeros((2, 2)), [1.0, 0.0])

        assert report.excluded_responses == ("b",)
        assert report.q_effective == 1
        assert report.mse_tilde_lasso == 1.0
        assert np.isnan(report.per_response_mse_tilde[1])
        assert "tilde_b" in report.as_row()

    def test_nonpositive_reference(self):
        Y = MaskedMatrix.from_nan([[1.0]])

        with pytest.raises(InvalidInputError):
            evaluate_predictions(Y, [[1.0]], [0.0])

    def test_unobserved_values_ignored(self):
        mask = np.array([[True, False], [True, True]])
        first = MaskedMatrix(values=[[1.0, 5.0], [2.0, 3.0]], mask=mask)
        second = MaskedMatrix(values=[[1.0, -50.0], [2.0, 3.0]], mask=mask)
        pred = np.zeros((2, 2))

        a = evaluate_predictions(first, pred, [1.0, 1.0])
        b = evaluate_predictions(second, pred, [1.0, 1.0])

        assert a.mse_tilde_smrm == b.mse_tilde_smrm

    def test_baseline_scores_q(self, split_dataset, baseline):
        """The lasso baseline against itself scores exactly q."""
        report = evaluate(baseline, split_dataset.test(), baseline.test_mse)

        assert report.mse_tilde_smrm == pytest.approx(split_dataset.q, rel=1e-12)

    def test_lasso_fits_match_baseline(self, split_dataset, baseline):
        from_fits = evaluate(
            list(baseline.fits), split_dataset.test(), baseline.test_mse
        )

        assert from_fits.mse_tilde_smrm == pytest.approx(split_dataset.q, rel=1e-12)


class TestBaseline:
    """Test cases for the per-response lasso baseline."""

    def test_fields(self, split_dataset, baseline):
        assert baseline.response_names == split_dataset.response_names
        assert baseline.lambda_train.shape == (split_dataset.q,)
        np.testing.assert_allclose(baseline.a, 1.0 / baseline.train_mse)
        assert np.all(np.isfinite(baseline.test_mse))
        assert baseline.n_folds == 5
        for cv, lam in zip(baseline.cv, baseline.lambda_train):
            assert cv.best_lambda == lam

    def test_deterministic(self, split_dataset, baseline):
        again = fit_baseline(split_dataset, k=5, seed=0)

        np.testing.assert_array_equal(again.lambda_train, baseline.lambda_train)

    def test_needs_split(self, synthetic_missing):
        dataset, _ = synthetic_missing

        with pytest.raises(InvalidInputError):
            fit_baseline(dataset)

    def test_too_few_training_rows(self):
        dataset = train_test_split(_complete(6), 0.5, seed=0)

        with pytest.raises(InvalidInputError) as exc:
            fit_baseline(dataset, k=5)
        assert exc.value.details["needed"] == 5


class TestRunPath:
    """Test cases for warm-started lambda1 paths."""

    def test_single_point_is_cold_fit(self, split_dataset, baseline):
        lambda2 = build_lambda2_uniform(baseline.lambda_train, 1.0, split_dataset.p)

        path = run_path(split_dataset, lambda2, [0.3], baseline.test_mse)

        cold = smrm_fit(
            split_dataset.train(), SmrmConfig(lambda1=0.3, lambda2=lambda2.values)
        )
        np.testing.assert_array_equal(path.points[0].fit.params.B, cold.params.B)
        assert path.points[0].report is not None
        assert path.points[0].report.lambda1 == 0.3

    def test_deterministic(self, split_dataset, baseline):
        lambda2 = build_lambda2_uniform(baseline.lambda_train, 0.5, split_dataset.p)
        grid = lambda1_grid(0.05, 0.5, 4)

        first = run_path(split_dataset, lambda2, grid, baseline.test_mse)
        second = run_path(split_dataset, lambda2, grid, baseline.test_mse)

        np.testing.assert_array_equal(first.mse_tilde, second.mse_tilde)
        assert first.n_failed == 0
        assert len(first.points) == 4

    def test_failed_point_is_recorded(self, split_dataset, baseline, monkeypatch):
        """A failing point keeps its error; the next one warm-starts from before."""
        lambda2 = build_lambda2_uniform(baseline.lambda_train, 1.0, split_dataset.p)
        calls = []

        def flaky(dataset, config, init=None):
            calls.append(init)
            if len(calls) == 2:
                raise InvalidInputError("boom", {"lambda1": config.lambda1})
            return smrm_fit(dataset, config, init=init)

        monkeypatch.setattr(path_eval, "smrm_fit", flaky)

        path = run_path(split_dataset, lambda2, [0.5, 0.3, 0.1], baseline.test_mse)

        assert path.points[1].failed
        assert path.points[1].error["error"] == "invalid_input"
        assert np.isnan(path.points[1].mse_tilde)
        assert calls[2] is path.points[0].fit.params
        assert path.n_failed == 1

    def test_without_split(self, synthetic_missing):
        dataset, _ = synthetic_missing
        lambda2 = build_lambda2_uniform(np.full(dataset.q, 0.1), 1.0, dataset.p)

        path = run_path(dataset, lambda2, [0.2, 0.1])

        assert all(pt.report is None for pt in path.points)
        assert path.points[0].fit.Y_imputed.shape == (dataset.n, dataset.q)

    def test_grid_must_descend(self, split_dataset):
        lambda2 = build_lambda2_uniform(np.full(split_dataset.q, 0.1), 1.0, 4)

        with pytest.raises(InvalidInputError):
            run_path(split_dataset, lambda2, [0.1, 0.2])

    def test_sweep_keeps_order(self, split_dataset, baseline):
        results = run_sweep(
            split_dataset,
            baseline,
            [2.0, 0.5],
            [0.4, 0.2],
            scale=EvaluationScale.RAW,
            max_jobs=1,
        )

        assert [res.r for res in results] == [2.0, 0.5]
        assert all(len(res.points) == 2 for res in results)


class TestPathSummaries:
    """Test cases for reference points and path tables."""

    def test_reference_points(self):
        refs = select_reference_points(_scored_path([3.0, 2.0, 1.5, 2.5, 2.8]))

        assert dict(refs.items()) == {"best": 2, "better1": 1, "better2": 3, "last": 4}

    def test_reference_points_at_edge(self):
        refs = select_reference_points(_scored_path([1.0, 2.0]))

        assert (refs.best, refs.better1, refs.better2, refs.last) == (0, 0, 1, 1)

    def test_reference_points_need_scores(self):
        path = PathResult(
            r=1.0,
            lambda2=build_lambda2_uniform([0.1], 1.0, 1),
            points=(PathPoint(index=0, lambda1=0.1),),
        )

        with pytest.raises(InvalidInputError):
            select_reference_points(path)

    def test_summarize_path(self, split_dataset, baseline):
        lambda2 = build_lambda2_uniform(baseline.lambda_train, 1.0, split_dataset.p)
        path = run_path(split_dataset, lambda2, [0.4, 0.2, 0.1], baseline.test_mse)

        frame = summarize_path(path)

        assert len(frame) == 3
        assert frame["lambda1"].tolist() == [0.4, 0.2, 0.1]
        assert (frame["mse_tilde_lasso"] == split_dataset.q).all()
        for name in split_dataset.response_names:
            assert f"tilde_{name}" in frame.columns
        np.testing.assert_allclose(frame["log_lambda1"], np.log([0.4, 0.2, 0.1]))
