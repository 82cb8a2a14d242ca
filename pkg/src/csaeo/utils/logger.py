import logging
import os

LOG_LEVEL_ENV = "CSAEO_LOG_LEVEL"

# logging.getLevelNamesMapping() is Python 3.11+; it returns a copy of _nameToLevel
_level_names_mapping = getattr(logging, "getLevelNamesMapping", lambda: dict(logging._nameToLevel))


def get_log_level() -> int:
    """Level from CSAEO_LOG_LEVEL (a name such as WARNING), else DEBUG=true, else INFO

    Unknown names fall through to the DEBUG flag.
    """
    name = os.getenv(LOG_LEVEL_ENV, "").strip().upper()
    level = _level_names_mapping().get(name) if name else None
    if level is not None:
        return level
    debug = os.getenv("DEBUG", "").lower() in ("1", "true", "yes", "on")
    return logging.DEBUG if debug else logging.INFO


logging.basicConfig(format='%(created)f [%(levelname)s] %(funcName)s: %(message)s', level=get_log_level())
logger = logging.getLogger("csaeo")


__all__ = ('LOG_LEVEL_ENV', 'logger', 'get_log_level')
