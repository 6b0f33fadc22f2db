from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application
    APP_NAME: str = "cantor2w"
    APP_VERSION: str = "1.0.0"
    SCHEMA_VERSION: int = 1

    # Parallelism
    CANTOR2W_THREADS: Optional[int] = None

    # Numerics
    QUADRATURE_TOL: float = 1e-3
    DEFAULT_DEPTH_OMEGA: int = 14
    DEFAULT_DEPTH_SIGMA: int = 12
    DEFAULT_SEED: int = 20240613

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = ""

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"

    @property
    def log_to_file(self) -> bool:
        """Whether a log file handler should be attached"""
        return bool(self.LOG_FILE.strip())


settings = Settings()
