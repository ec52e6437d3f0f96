import os
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support"""

    # Directories
    UPLOAD_DIR: str = "uploads"
    RESULTS_DIR: str = "results"

    # Config uploads
    MAX_CONFIG_SIZE: int = 1024 * 1024  # 1MB
    ALLOWED_CONFIG_EXTENSIONS: set = {".json"}

    # Job management
    JOB_RETENTION_HOURS: int = 24
    MAX_CONCURRENT_JOBS: int = 2

    # API settings
    API_TITLE: str = "degenflow API"
    API_VERSION: str = "1.0.0"
    CORS_ORIGINS: list = ["http://localhost:3000", "http://localhost:5173"]
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Solver
    DEFAULT_CFL_SAFETY: float = 0.45

    # Quadrature in the state variable (composite Simpson with doubling)
    QUADRATURE_MIN_INTERVALS: int = 64
    QUADRATURE_TOL: float = 1e-10
    QUADRATURE_MAX_DOUBLINGS: int = 8

    # Verification tolerances
    CLASSIFIER_TOL: float = 1e-10
    CONCAVITY_TOL: float = 1e-10
    HOLDER_RATIO_BOUND: float = 1e3
    STATE_SAMPLES: int = 17
    RESIDUAL_TOL_CONSTANT: float = 0.02
    SUP_NORM_SLACK: float = 1e-12

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)


settings = Settings()

# Ensure directories exist
os.makedirs(settings.UPLOAD_DIR, exist_ok=True)
os.makedirs(settings.RESULTS_DIR, exist_ok=True)
