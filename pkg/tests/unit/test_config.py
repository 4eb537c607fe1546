"""Unit tests for settings and run configuration."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from smrm.core.config import Settings
from smrm.core.errors import InvalidInputError
from smrm.features.ingestion.schemas import MissingMechanism
from smrm.features.path_eval.schemas import EvaluationScale, Lambda2Mode
from smrm.features.runs.schemas import RunConfig
from smrm.features.runs.service import load_run_config, normalise_key


class TestSettings:
    """Test cases for environment-driven settings."""

    def test_defaults(self):
        settings = Settings(_env_file=None)

        assert settings.em_epsilon == 1e-4
        assert settings.cv_folds == 5
        assert settings.split_ratio == 0.8
        assert settings.lambda1_points == 200
        assert settings.r_values[0] == 3.0
        assert settings.cv_tol > settings.lasso_tol

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SMRM_EM_MAX_ITER", "7")
        monkeypatch.setenv("SMRM_LOG_LEVEL", "DEBUG")

        settings = Settings(_env_file=None)

        assert settings.em_max_iter == 7
        assert settings.log_level == "DEBUG"


class TestRunConfig:
    """Test cases for RunConfig validation."""

    def test_comma_lists(self):
        config = RunConfig(response_columns="a, b", r_values="2,0.5")

        assert config.response_columns == ["a", "b"]
        assert config.r_values == [2.0, 0.5]

    def test_enums_from_strings(self):
        config = RunConfig(
            scale="log", lambda2_mode="adjusted", sim_mechanism="mar"
        )

        assert config.scale is EvaluationScale.LOG
        assert config.lambda2_mode is Lambda2Mode.ADJUSTED
        assert config.sim_mechanism is MissingMechanism.MAR

    def test_zero_r_rejected(self):
        with pytest.raises(InvalidInputError):
            RunConfig(r_values="1,0")

    def test_overlapping_columns(self):
        with pytest.raises(InvalidInputError):
            RunConfig(response_columns="a", predictor_columns="a,b")

    def test_grid_bounds(self):
        with pytest.raises(InvalidInputError):
            RunConfig(lambda1_low=1.0, lambda1_high=0.5)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            RunConfig(lamda1=0.1)

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            RunConfig(split_ratio=1.5)

    def test_require_data(self):
        with pytest.raises(InvalidInputError):
            RunConfig().require_data()

    def test_synthetic_spec(self):
        spec = RunConfig(sim_n=30, sim_q=2, sim_seed=4).synthetic_spec()

        assert (spec.n, spec.q, spec.seed) == (30, 2, 4)


class TestLoadRunConfig:
    """Test cases for reading flat config files."""

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text(
            "# comment\n"
            "data_path = data.csv\n"
            "response-columns = y1,y2\n"
            "LAMBDA1 = 0.3\n"
            "heatmap_svg = false\n",
            encoding="utf-8",
        )

        config = load_run_config(path, {"lambda1": "0.05", "cv-folds": "3"})

        assert config.data_path == tmp_path / "data.csv"
        assert config.response_columns == ["y1", "y2"]
        assert config.lambda1 == 0.05
        assert config.cv_folds == 3
        assert config.heatmap_svg is False

    def test_absolute_data_path_kept(self, tmp_path):
        path = tmp_path / "run.env"
        target = Path("/data/input.csv")
        path.write_text(f"data_path={target}\n", encoding="utf-8")

        assert load_run_config(path).data_path == target

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_run_config(tmp_path / "absent.env")

    def test_key_without_value(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("data_path\n", encoding="utf-8")

        with pytest.raises(InvalidInputError) as exc:
            load_run_config(path)
        assert exc.value.details["key"] == "data_path"

    def test_no_file(self):
        config = load_run_config(None, {"sim_n": "12"})

        assert config.sim_n == 12

    @pytest.mark.parametrize(
        "raw, key", [("--cv-folds", "cv_folds"), (" LAMBDA1 ", "lambda1")]
    )
    def test_normalise_key(self, raw, key):
        assert normalise_key(raw) == key
