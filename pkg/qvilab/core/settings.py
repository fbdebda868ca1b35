"""Process-wide settings read from the environment (and an optional .env file)."""

import logging
import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    """Run-wide knobs that do not belong in a model document."""
    loop_budget: int = 1_000_000
    log_level: str = "WARNING"
    progress: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        if self.loop_budget < 1:
            raise ValueError("loop_budget must be positive")
        if logging.getLevelName(self.log_level.upper()) == f"Level {self.log_level.upper()}":
            raise ValueError(f"Unknown log level: {self.log_level}")


def _flag(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Load settings once per process.

    Returns:
        Settings built from QVI_* environment variables
    """
    load_dotenv()
    return Settings(
        loop_budget=int(os.getenv("QVI_LOOP_BUDGET", "1000000")),
        log_level=os.getenv("QVI_LOG_LEVEL", "WARNING"),
        progress=_flag(os.getenv("QVI_PROGRESS", "0")),
        out_dir=os.getenv("QVI_OUT_DIR", "out"),
    )
