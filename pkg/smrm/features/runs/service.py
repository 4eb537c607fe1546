"""Subcommand orchestration: load data, run the protocol, write artifacts."""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from smrm.core.errors import InvalidInputError
from smrm.core.logging import logger
from smrm.features.core_types.schemas import (
    Dataset,
    MaskedMatrix,
    ModelParams,
    SplitTag,
)
from smrm.features.core_types.service import (
    precision_to_correlation,
    precision_to_partial_correlation,
)
from smrm.features.estimation.schemas import SmrmConfig, SmrmFit
from smrm.features.estimation.service import smrm_fit
from smrm.features.export.schemas import ConventionFlags, RunMetadata
from smrm.features.export.service import ArtifactWriter, matrix_table
from smrm.features.ingestion.csv_service import (
    dataset_frame,
    ingest_csv,
    missingness_summary,
)
from smrm.features.ingestion.synthetic import generate_synthetic, recovery_report
from smrm.features.path_eval.schemas import BaselineResult, EvaluationScale, PathResult
from smrm.features.path_eval.service import (
    evaluate,
    exp_back,
    fit_baseline,
    lambda1_grid,
    lambda2_for,
    log_transform,
    run_sweep,
    select_reference_points,
    summarize_path,
    train_test_split,
)
from smrm.features.runs.schemas import RunConfig, Subcommand


def normalise_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_").lower()


def load_run_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Merge a ``key = value`` file with flag overrides and validate.

    Relative ``data_path`` values in the file resolve against the file's
    directory.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(
                f"Config file not found: {path}", {"path": str(path)}
            )
        for key, value in dotenv_values(path).items():
            if value is None:
                raise InvalidInputError(
                    f"Config key {key} has no value", {"path": str(path), "key": key}
                )
            values[normalise_key(key)] = value
        data_path = values.get("data_path")
        if data_path and not Path(data_path).is_absolute():
            values["data_path"] = str(path.parent / data_path)
    for key, value in (overrides or {}).items():
        values[normalise_key(key)] = value
    return RunConfig(**values)


def _config_env(values: Mapping[str, Any]) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


class RunService:
    """Runs one subcommand and records its artifacts."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.writer = ArtifactWriter(config.output_dir)

    # Shared steps

    def _smrm_config(self, lambda1: float, lambda2: np.ndarray) -> SmrmConfig:
        c = self.config
        return SmrmConfig(
            lambda1=lambda1,
            lambda2=lambda2,
            epsilon=c.em_epsilon,
            max_em_iter=c.em_max_iter,
            inner_tol=c.inner_tol,
            inner_max_iter=c.inner_max_iter,
            glasso_tol=c.glasso_tol,
            glasso_max_iter=c.glasso_max_iter,
        )

    def load(self) -> Dataset:
        """Ingest the input CSV on the configured modeling scale."""
        c = self.config
        dataset = ingest_csv(
            c.require_data(), c.response_columns, c.predictor_columns, c.missing_token
        )
        if c.scale is EvaluationScale.LOG:
            dataset = dataset.with_responses(log_transform(dataset.Y))
        return dataset

    def split(self, dataset: Dataset) -> Dataset:
        c = self.config
        return train_test_split(
            dataset, c.split_ratio, c.split_seed, max_retries=c.split_max_retries
        )

    def baseline_for(self, dataset: Dataset) -> BaselineResult:
        return fit_baseline(dataset, k=self.config.cv_folds, seed=self.config.cv_seed)

    def _write_baseline(self, baseline: BaselineResult) -> None:
        table = pd.DataFrame(
            {
                "name": list(baseline.response_names),
                "lambda_train": baseline.lambda_train,
                "mse": baseline.test_mse,
                "train_mse": baseline.train_mse,
                "a": baseline.a,
            }
        )
        self.writer.table("baseline.csv", table, "Per-response lasso baseline")

    def _write_params(self, params: ModelParams, dataset: Dataset, prefix: str) -> None:
        names = dataset.response_names
        self.writer.table(
            f"{prefix}coefficients.csv",
            matrix_table(
                params.B_tilde,
                ("(intercept)",) + dataset.predictor_names,
                names,
                index_label="predictor",
            ),
            "Intercepts and coefficients",
        )
        self.writer.table(
            f"{prefix}precision.csv",
            matrix_table(params.K, names, names, index_label="response"),
            "Precision matrix K",
        )

    def _write_heatmaps(self, params: ModelParams, names: Any, stem: str) -> None:
        svg = self.config.heatmap_svg
        self.writer.heatmap(
            f"{stem}_correlation",
            precision_to_correlation(params.K),
            names,
            f"Correlation {stem}",
            svg=svg,
        )
        self.writer.heatmap(
            f"{stem}_partial_correlation",
            precision_to_partial_correlation(params.K),
            names,
            f"Partial correlation {stem}",
            svg=svg,
        )

    def _metadata(self, subcommand: Subcommand, summary: Dict[str, Any]) -> Path:
        c = self.config
        metadata = RunMetadata(
            subcommand=subcommand.value,
            seeds=c.seeds(),
            conventions=ConventionFlags(
                evaluation_scale=c.scale.value, cv_folds=c.cv_folds
            ),
            config=c.model_dump(mode="json"),
            summary=summary,
        )
        return self.writer.write_metadata(metadata)

    # Subcommands

    def baseline(self) -> Dict[str, Any]:
        dataset = self.split(self.load())
        baseline = self.baseline_for(dataset)
        self._write_baseline(baseline)
        report = evaluate(
            baseline, dataset.test(), baseline.test_mse, scale=self.config.scale
        )
        return {
            "n": dataset.n,
            "q": dataset.q,
            "mse_tilde_lasso": report.mse_tilde_lasso,
            "q_effective": report.q_effective,
            "excluded_responses": list(report.excluded_responses),
            "split_retries": dataset.split_retries,
        }

    def _fit_one(self, dataset: Dataset, baseline: BaselineResult) -> SmrmFit:
        c = self.config
        lambda2 = lambda2_for(baseline, c.r, dataset.p, c.lambda2_mode)
        self.writer.table(
            "lambda2.csv",
            matrix_table(
                lambda2.values,
                dataset.predictor_names,
                dataset.response_names,
                index_label="predictor",
            ),
            f"Coefficient penalties (r={c.r:g}, {c.lambda2_mode.value})",
        )
        return smrm_fit(dataset.train(), self._smrm_config(c.lambda1, lambda2.values))

    def fit(self) -> Dict[str, Any]:
        c = self.config
        dataset = self.split(self.load())
        baseline = self.baseline_for(dataset)
        self._write_baseline(baseline)
        fit = self._fit_one(dataset, baseline)
        train, test = dataset.train(), dataset.test()

        self._write_params(fit.params, dataset, prefix="")
        imputed = train.with_responses(
            MaskedMatrix(
                values=fit.Y_imputed,
                mask=np.ones(fit.Y_imputed.shape, dtype=bool),
                column_names=train.response_names,
            )
        )
        self.writer.table(
            "imputed_train.csv",
            dataset_frame(imputed, c.missing_token),
            "Training rows with missing responses imputed",
        )
        self.writer.table(
            "objective_trace.csv",
            pd.DataFrame(
                {
                    "iteration": np.arange(len(fit.objective_trace)),
                    "objective": fit.objective_trace,
                }
            ),
            "Observed-data penalized objective per EM iteration",
        )
        test_rows = [str(i) for i in dataset.rows_tagged(SplitTag.TEST)]
        predictions = fit.params.predict(test.X)
        self.writer.table(
            "predictions_test.csv",
            matrix_table(
                predictions,
                test_rows,
                dataset.response_names,
                index_label="row",
            ),
            f"Test predictions ({c.scale.value} scale)",
        )
        if c.scale is EvaluationScale.LOG:
            self.writer.table(
                "predictions_test_original.csv",
                matrix_table(
                    exp_back(predictions),
                    test_rows,
                    dataset.response_names,
                    index_label="row",
                ),
                "Test predictions back-transformed to the original scale",
            )

        report = evaluate(fit, test, baseline.test_mse, scale=c.scale, r=c.r)
        self.writer.table(
            "evaluation.csv",
            pd.DataFrame(
                {
                    "name": list(report.response_names),
                    "mse_lasso": report.per_response_mse_lasso,
                    "mse_smrm": report.per_response_mse_smrm,
                    "mse_tilde": report.per_response_mse_tilde,
                }
            ),
            "Per-response test errors",
        )
        self._write_heatmaps(fit.params, dataset.response_names, "fit")
        return {
            "lambda1": c.lambda1,
            "r": c.r,
            "em_iters": fit.em_iters,
            "converged": fit.converged,
            "objective": fit.objective,
            "mse_tilde_smrm": report.mse_tilde_smrm,
            "mse_tilde_lasso": report.mse_tilde_lasso,
        }

    def path(self) -> Dict[str, Any]:
        c = self.config
        dataset = self.split(self.load())
        baseline = self.baseline_for(dataset)
        self._write_baseline(baseline)
        grid = lambda1_grid(c.lambda1_low, c.lambda1_high, c.lambda1_points)
        results = run_sweep(
            dataset,
            baseline,
            c.r_values,
            grid,
            mode=c.lambda2_mode,
            config=self._smrm_config(float(grid[0]), np.zeros((dataset.p, dataset.q))),
            scale=c.scale,
            max_jobs=c.max_jobs,
        )
        curves = pd.concat([summarize_path(res) for res in results], ignore_index=True)
        self.writer.table("path_curves.csv", curves, "mse_tilde against lambda1 per r")

        rows = []
        for res in results:
            rows.append(self._path_reference(res, dataset))
        self.writer.table("path_summary.csv", pd.DataFrame(rows), "Best point per r")
        return {
            "r_values": list(c.r_values),
            "grid_points": int(grid.size),
            "failed_points": int(sum(res.n_failed for res in results)),
            "converged_points": int(sum(res.n_converged for res in results)),
        }

    def _path_reference(self, result: PathResult, dataset: Dataset) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "r": result.r,
            "n_converged": result.n_converged,
            "n_failed": result.n_failed,
        }
        try:
            refs = select_reference_points(result)
        except InvalidInputError:
            logger.warning(f"r={result.r:g}: no evaluated point, heatmaps skipped")
            return row
        best = result.points[refs.best]
        row.update({"best_index": refs.best, "best_lambda1": best.lambda1})
        row["best_mse_tilde"] = best.mse_tilde
        for label, index in refs.items():
            point = result.points[index]
            if point.fit is not None:
                stem = f"heatmaps/r{result.r:g}_{label}"
                self._write_heatmaps(point.fit.params, dataset.response_names, stem)
        return row

    def simulate(self) -> Dict[str, Any]:
        c = self.config
        spec = c.synthetic_spec()
        synthetic, truth = generate_synthetic(spec)
        data_path = self.writer.table(
            "data.csv",
            dataset_frame(synthetic, c.missing_token),
            "Synthetic dataset",
        )
        self._write_params(truth, synthetic, prefix="truth_")
        fit_values: Dict[str, Any] = {
            "data_path": data_path.resolve(),
            "response_columns": list(synthetic.response_names),
            "predictor_columns": list(synthetic.predictor_names),
            "missing_token": c.missing_token,
            "output_dir": (c.output_dir / "fit").resolve(),
            "lambda1": c.lambda1,
            "r": c.r,
            "cv_folds": c.cv_folds,
            "split_seed": c.split_seed,
        }
        self.writer.text("fit.env", _config_env(fit_values), "env", "Config for fit")

        dataset = self.split(synthetic)
        baseline = self.baseline_for(dataset)
        fit = self._fit_one(dataset, baseline)
        recovery = recovery_report(truth, fit.params)
        self.writer.json("recovery.json", recovery.model_dump(mode="json"))
        self.writer.table(
            "missingness.csv", missingness_summary(dataset), "Missing ratios"
        )
        return {"spec": spec.model_dump(mode="json"), **recovery.model_dump()}

    def missingness(self) -> Dict[str, Any]:
        dataset = self.split(self.load())
        table = missingness_summary(dataset)
        self.writer.table("missingness.csv", table, "Missing ratios")
        return {
            "n": dataset.n,
            "total_missing_ratio": float(dataset.Y.missing_ratio()),
        }

    def run(self, subcommand: Subcommand) -> Dict[str, Any]:
        """Run ``subcommand`` and write the metadata sidecar.

        Returns:
            The run summary, with ``missing_artifacts`` listing expected files
            not found on disk.
        """
        logger.info(f"Starting {subcommand.value} (output: {self.config.output_dir})")
        handlers = {
            Subcommand.BASELINE: self.baseline,
            Subcommand.FIT: self.fit,
            Subcommand.PATH: self.path,
            Subcommand.SIMULATE: self.simulate,
            Subcommand.MISSINGNESS: self.missingness,
        }
        summary = handlers[subcommand]()
        self._metadata(subcommand, summary)
        summary["missing_artifacts"] = self.writer.missing_artifacts()
        count = len(self.writer.records)
        logger.info(f"Finished {subcommand.value}: {count} artifacts")
        return summary
