import json
from pathlib import Path
from typing import List

import pandas as pd
import pytest

from smrm.features.ingestion.csv_service import write_csv
from smrm.features.ingestion.schemas import SyntheticSpec
from smrm.features.ingestion.synthetic import generate_synthetic
from smrm.main import EXIT_ERROR, EXIT_OK, main

FAST = ["--heatmap-svg", "false", "--cv-folds", "3"]


@pytest.fixture
def data_csv(tmp_path: Path) -> Path:
    """Synthetic CSV with 90 rows, 3 predictors and 3 responses."""
    dataset, _ = generate_synthetic(
        SyntheticSpec(n=90, p=3, q=3, missing_rate=0.25, seed=12)
    )
    return write_csv(dataset, tmp_path / "data.csv")


@pytest.fixture
def config_file(tmp_path: Path, data_csv: Path) -> Path:
    path = tmp_path / "run.env"
    path.write_text(
        "data_path = data.csv\n"
        "response_columns = y1,y2,y3\n"
        f"output_dir = {tmp_path / 'out'}\n"
        "lambda1 = 0.1\n",
        encoding="utf-8",
    )
    return path


def _error_lines(stderr: str) -> List[dict]:
    return [json.loads(line) for line in stderr.splitlines() if line.startswith("{")]


class TestCLIIntegration:
    """Integration tests running the subcommands end to end."""

    def test_baseline(self, config_file: Path, tmp_path: Path) -> None:
        """Test the baseline writes one row per response."""
        assert main(["baseline", "--config", str(config_file), *FAST]) == EXIT_OK

        table = pd.read_csv(tmp_path / "out" / "baseline.csv")
        assert table["name"].tolist() == ["y1", "y2", "y3"]
        assert {"name", "lambda_train", "mse", "train_mse", "a"} <= set(table.columns)
        sidecar = json.loads((tmp_path / "out" / "run_metadata.json").read_text())
        assert sidecar["subcommand"] == "baseline"
        assert sidecar["summary"]["mse_tilde_lasso"] == 3.0
        assert sidecar["conventions"]["cv_folds"] == 3

    def test_fit(self, config_file: Path, tmp_path: Path) -> None:
        """Test a single fit writes parameters, imputations and the evaluation."""
        assert main(["fit", "--config", str(config_file), *FAST]) == EXIT_OK

        out = tmp_path / "out"
        for name in (
            "coefficients.csv",
            "precision.csv",
            "lambda2.csv",
            "imputed_train.csv",
            "objective_trace.csv",
            "predictions_test.csv",
            "evaluation.csv",
            "fit_correlation.csv",
            "fit_partial_correlation.csv",
        ):
            assert (out / name).is_file(), name
        assert not (out / "fit_correlation.svg").exists()
        imputed = pd.read_csv(out / "imputed_train.csv")
        assert imputed.notna().all().all()
        trace = pd.read_csv(out / "objective_trace.csv")["objective"]
        assert (trace.diff().dropna() <= 1e-6 * trace.abs().max()).all()
        coefficients = pd.read_csv(out / "coefficients.csv")
        assert coefficients["predictor"].tolist() == ["(intercept)", "x1", "x2", "x3"]

    def test_fit_log_scale(self, config_file: Path, tmp_path: Path) -> None:
        """Test log scale rejects nonpositive responses with a structured error."""
        code = main(["fit", "--config", str(config_file), "--scale", "log", *FAST])

        assert code == EXIT_ERROR
        record = json.loads((tmp_path / "out" / "error.json").read_text())
        assert record["error"] == "invalid_input"
        assert "column" in record["details"]

    def test_path(self, config_file: Path, tmp_path: Path) -> None:
        """Test the path sweep writes one curve per r value."""
        args = [
            "path",
            "--config",
            str(config_file),
            "--r-values",
            "1,0.5",
            "--lambda1-points",
            "3",
            "--lambda1-low",
            "0.05",
            "--lambda1-high",
            "0.5",
            *FAST,
        ]

        assert main(args) == EXIT_OK

        out = tmp_path / "out"
        curves = pd.read_csv(out / "path_curves.csv")
        assert len(curves) == 6
        assert sorted(curves["r"].unique().tolist()) == [0.5, 1.0]
        summary = pd.read_csv(out / "path_summary.csv")
        assert summary["r"].tolist() == [1.0, 0.5]
        for label in ("best", "better1", "better2", "last"):
            assert (out / "heatmaps" / f"r1_{label}_correlation.csv").is_file()

    def test_simulate_then_fit(self, tmp_path: Path) -> None:
        """Test simulate writes a config that fit can run directly."""
        out = tmp_path / "sim"
        args = ["simulate", "--output-dir", str(out), "--sim-n", "80", "--sim-p", "3"]

        assert main([*args, "--sim-q", "3", *FAST]) == EXIT_OK

        assert (out / "data.csv").is_file()
        recovery = json.loads((out / "recovery.json").read_text())
        assert recovery["true_edges"] == 2
        assert main(["fit", "--config", str(out / "fit.env"), *FAST]) == EXIT_OK
        assert (out / "fit" / "precision.csv").is_file()

    def test_missingness(self, config_file: Path, tmp_path: Path) -> None:
        """Test the missingness table has one row per response plus a total."""
        assert main(["missingness", "--config", str(config_file)]) == EXIT_OK

        table = pd.read_csv(tmp_path / "out" / "missingness.csv")
        assert table["response"].tolist() == ["y1", "y2", "y3", "total"]
        assert {"missing_all", "missing_train", "missing_test"} <= set(table.columns)

    def test_missing_data_path(self, tmp_path: Path, capsys) -> None:
        """Test a missing input path exits 1 with error.json and a stderr record."""
        out = tmp_path / "out"

        code = main(["fit", "--output-dir", str(out), "--response-columns", "y1"])

        assert code == EXIT_ERROR
        record = json.loads((out / "error.json").read_text())
        assert record["error"] == "invalid_input"
        assert _error_lines(capsys.readouterr().err)[-1]["error"] == "invalid_input"

    def test_missing_config_file(self, tmp_path: Path) -> None:
        """Test a missing config file is reported like any input error."""
        out = tmp_path / "out"

        missing = str(tmp_path / "nope.env")
        code = main(["baseline", "--config", missing, "--output-dir", str(out)])

        assert code == EXIT_ERROR
        assert json.loads((out / "error.json").read_text())["error"] == "invalid_input"

    def test_invalid_value(self, config_file: Path, tmp_path: Path) -> None:
        """Test a value pydantic rejects yields an invalid_config record."""
        out = str(tmp_path / "out")
        args = ["baseline", "--config", str(config_file), "--output-dir", out]
        code = main([*args, "--split-ratio", "2"])

        assert code == EXIT_ERROR
        record = json.loads((tmp_path / "out" / "error.json").read_text())
        assert record["error"] == "invalid_config"
        assert record["details"]["errors"][0]["loc"] == ["split_ratio"]

    def test_unparseable_csv(self, tmp_path: Path) -> None:
        """Test a bad cell names its row and column."""
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n2,oops\n", encoding="utf-8")
        out = tmp_path / "out"

        code = main(
            [
                "missingness",
                "--data-path",
                str(path),
                "--response-columns",
                "y",
                "--output-dir",
                str(out),
            ]
        )

        assert code == EXIT_ERROR
        record = json.loads((out / "error.json").read_text())
        assert record["error"] == "ingestion_failed"
        assert record["details"]["line"] == 3

    def test_version(self, capsys) -> None:
        """Test --version prints the package version."""
        with pytest.raises(SystemExit) as exc:
            main(["--version"])

        assert exc.value.code == 0
        assert "1.0.0" in capsys.readouterr().out
