from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict

from smrm import __version__


class Settings(BaseSettings):
    app_name: str = "smrm"
    version: str = __version__
    description: str = (
        "Sparse multivariate regression with EM imputation of missing responses"
    )

    # Logging
    log_level: str = "INFO"

    # EM outer loop
    em_epsilon: float = 1e-4
    em_max_iter: int = 200
    descent_tolerance: float = 1e-6

    # M-step coefficient update
    inner_tol: float = 1e-6
    inner_max_iter: int = 1000

    # Graphical lasso
    glasso_tol: float = 1e-4
    glasso_max_iter: int = 100
    glasso_inner_tol: float = 1e-8
    glasso_inner_max_iter: int = 1000

    # Per-response lasso
    lasso_tol: float = 1e-7
    cv_tol: float = 1e-5
    lasso_max_iter: int = 10000

    # Cross-validation
    cv_folds: int = 5
    cv_seed: int = 0
    cv_grid_size: int = 100
    cv_grid_ratio: float = 1e-4

    # Regularization path
    lambda1_low: float = 6.5e-3
    lambda1_high: float = 1.0
    lambda1_points: int = 200
    r_values: List[float] = [3.0, 2.0, 1.0, 0.75, 0.5, 0.225, 0.2, 0.175, 0.1]

    # Train/test split
    split_ratio: float = 0.8
    split_seed: int = 0
    split_max_retries: int = 100

    # Parallel r-sweep
    max_jobs: int = 1

    model_config = SettingsConfigDict(env_prefix="SMRM_", env_file=".env")


settings = Settings()
