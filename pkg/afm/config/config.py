"""Configuration settings for the application."""
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables or a .env file."""
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "out"
    WORKERS: int = Field(default=1, ge=1)
    DEFAULT_SEED: int = Field(default=20190430, ge=0, lt=2**64)
    GHAT_GRID_POINTS: int = Field(default=201, ge=2)
    HOST: str = "127.0.0.1"
    PORT: int = 8000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        env_prefix="AFM_",
        extra="ignore"
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Create a global instance
settings = get_settings()
