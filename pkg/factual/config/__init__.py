import logging
import os

LOG_ENV_VAR = "FACTUAL_LOG"
_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}

_requested = os.getenv(LOG_ENV_VAR, "INFO").strip().upper()

logging.basicConfig(level=_LEVELS.get(_requested, logging.INFO))
logger = logging.getLogger("factual")
logger.setLevel(_LEVELS.get(_requested, logging.INFO))

if _requested not in _LEVELS:
    logger.warning(f"Unknown {LOG_ENV_VAR} level '{_requested}', using INFO")


def set_verbosity(level: str) -> None:
    """Change the package log level at runtime (DEBUG, INFO, WARNING or ERROR)."""
    name = level.strip().upper()
    if name not in _LEVELS:
        raise ValueError(f"Invalid log level '{level}'. Must be one of: {', '.join(_LEVELS)}")
    logger.setLevel(_LEVELS[name])
