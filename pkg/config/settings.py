"""Application settings using Pydantic Settings."""

from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide solver settings.

    Per-run numerics live in ``core.domain.problem.ProblemConfig``; this class
    only carries values that are the same for every run of a process
    (logging, output root, physical and numerical constants the registry
    defaults fall back to).
    """

    # Environment
    ENVIRONMENT: str = Field(default="development", description="Application environment")

    # Logging Settings
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_FORMAT: Optional[str] = Field(default=None, description="Log format (json or console); unset means json in production")

    # Output Settings
    OUTPUT_DIR: str = Field(default="runs", description="Root directory for run outputs")

    # Physics
    GRAVITY: float = Field(default=1.0, description="Gravitational acceleration g")
    DRY_TOLERANCE: float = Field(default=1e-6, description="Depth below which a cell is dry")

    # Moving mesh
    REMAP_CFL: float = Field(default=0.18, description="Pseudo-time CFL constant of the DG interpolation")
    METRIC_SMOOTHING_SWEEPS: int = Field(default=2, description="Neighbor-averaging sweeps on the metric")
    MOVER_ITERATIONS: int = Field(default=5, description="Damped energy-descent iterations per adaptation")

    # Reference solutions
    REFERENCE_REFINEMENT: int = Field(default=10, description="Refinement factor of fixed-mesh reference runs")

    @field_validator("ENVIRONMENT")
    @classmethod
    def validate_environment(cls, v):
        """Validate environment value."""
        allowed_envs = ["development", "production", "test"]
        if v not in allowed_envs:
            raise ValueError(f"Environment must be one of {allowed_envs}")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v):
        """Validate log level."""
        allowed_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed_levels:
            raise ValueError(f"Log level must be one of {allowed_levels}")
        return v.upper()

    @field_validator("LOG_FORMAT")
    @classmethod
    def validate_log_format(cls, v):
        """Validate log format."""
        if v is None:
            return None
        if v.lower() not in ("json", "console"):
            raise ValueError("Log format must be 'json' or 'console'")
        return v.lower()

    @field_validator("GRAVITY", "DRY_TOLERANCE", "REMAP_CFL")
    @classmethod
    def validate_positive(cls, v):
        """Validate strictly positive constants."""
        if v <= 0:
            raise ValueError("Value must be positive")
        return v

    @field_validator("REMAP_CFL")
    @classmethod
    def validate_remap_cfl(cls, v):
        """The pseudo-time CFL must stay below one."""
        if v >= 1:
            raise ValueError("Remap CFL must be < 1")
        return v

    @field_validator("REFERENCE_REFINEMENT", "MOVER_ITERATIONS")
    @classmethod
    def validate_count(cls, v):
        """Validate counts."""
        if v < 1:
            raise ValueError("Count must be at least 1")
        return v

    @property
    def is_production(self) -> bool:
        """Check if running in production mode."""
        return self.ENVIRONMENT == "production"

    @property
    def json_logs(self) -> bool:
        """Whether structlog should render JSON lines."""
        if self.LOG_FORMAT is None:
            return self.is_production
        return self.LOG_FORMAT == "json"

    model_config = SettingsConfigDict(
        env_prefix="RIPA_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Alias
def get_config() -> Settings:
    """Get configuration settings."""
    return get_settings()
