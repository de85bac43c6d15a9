"""
Configuration settings for the analogue-digital mode simulator
"""

from pathlib import Path
from typing import List

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings"""

    # Server configuration
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    DEBUG: bool = False

    # CORS configuration
    ALLOWED_ORIGINS: List[str] = ["*"]

    # Database configuration (run registry)
    DATABASE_URL: str = "sqlite:///./adsim_runs.db"

    # Logging configuration
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Scenario files
    SCENARIO_DIR: str = str(Path(__file__).resolve().parents[2] / "configs")

    # Run defaults
    DEFAULT_SEED: int = 0
    DEFAULT_HORIZON: float = 240.0
    DEFAULT_GRID_DENSITY: float = 0.5

    # Numerics
    GRID_PITCH_FRACTION: float = 0.01  # measurement grid pitch as a fraction of epsilon
    SAMPLE_STEP_FRACTION: float = 0.1  # tube sampling step as a fraction of lambda

    # Trace files
    TRACE_FORMAT_VERSION: int = 1

    # Transfer policy: a transfer loop that runs out of steps counts as a failure
    TRANSFER_EXHAUSTION_FAILS: bool = True

    class Config:
        env_file = ".env"
        case_sensitive = True


# Create settings instance
settings = Settings()
