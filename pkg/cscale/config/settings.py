"""
Runtime settings module
Reads process-level settings (threads, log level, default seed) from the environment
"""

import os
import logging
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings:
    """Environment-backed runtime settings."""

    def __init__(self):
        self.threads: int = self._read_int('CSCALE_THREADS', 1)
        self.log_level: str = os.getenv('CSCALE_LOG_LEVEL', 'INFO').upper()
        self.default_seed: int = self._read_int('CSCALE_DEFAULT_SEED', 0)

        self._validate()

    @staticmethod
    def _read_int(name: str, default: int) -> int:
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            return default
        try:
            return int(raw)
        except ValueError:
            logger.warning(f"{name}={raw!r} is not an integer, using {default}")
            return default

    def _validate(self) -> None:
        """Clamp out-of-range values back to safe defaults."""
        if self.threads < 1:
            logger.warning(f"CSCALE_THREADS must be >= 1 (got {self.threads}), using 1")
            self.threads = 1
        if self.log_level not in LOG_LEVELS:
            logger.warning(f"CSCALE_LOG_LEVEL {self.log_level!r} unknown, using INFO")
            self.log_level = 'INFO'
        if not 0 <= self.default_seed < 2 ** 64:
            logger.warning("CSCALE_DEFAULT_SEED outside the 64-bit range, using 0")
            self.default_seed = 0

    @property
    def numeric_log_level(self) -> int:
        """Log level as the integer the logging module expects."""
        return getattr(logging, self.log_level)

    def as_dict(self) -> dict:
        return {
            "threads": self.threads,
            "log_level": self.log_level,
            "default_seed": self.default_seed,
        }


# Global settings instance
settings = Settings()

logger.debug(f"Runtime settings loaded: {settings.as_dict()}")
