from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="PHASELAB_", extra="ignore")

    OUTPUT_DIR: str = "output"
    CACHE_DIR: str = ".phaselab_cache"
    CACHE_ENABLED: bool = False
    THREADS: int = Field(1, ge=1)
    LOG_DIR: str = "logs"
    LOG_LEVEL: str = "INFO"
    BLOCK_SIZE: int = Field(256, ge=1)  # rows per reduction block
    DENSE_CACHE_LIMIT: int = 2048
    DIRECT_PAIR_LIMIT: int = 50_000_000
    MAX_EXTENDED_CELLS: int = 2_000_000
    TABLE_VERSION: int = 3


settings = Settings()
