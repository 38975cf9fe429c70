from dotenv import load_dotenv
import os
from pathlib import Path

DEFAULT_OUTPUT_DIR = "runs"
DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_EVENTS = 1_000_000
DEFAULT_MARKING_CAP = 10_000


def _number(name, default, cast):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = cast(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {raw!r}")
    return value


class Config:
    def __init__(self):
        load_dotenv()
        self.OUTPUT_DIR = Path(os.getenv('HPN_OUTPUT_DIR', DEFAULT_OUTPUT_DIR))
        self.REL_TOL = _number('HPN_REL_TOL', DEFAULT_TOLERANCE, float)
        self.EVENT_TOL = _number('HPN_EVENT_TOL', DEFAULT_TOLERANCE, float)
        self.MAX_EVENTS = _number('HPN_MAX_EVENTS', DEFAULT_MAX_EVENTS, int)
        self.MARKING_CAP = _number('HPN_MARKING_CAP', DEFAULT_MARKING_CAP, int)
        self.JOBS = _number('HPN_JOBS', 1, int)

        self.LOG_LEVEL = os.getenv('HPN_LOG_LEVEL', 'INFO').upper()
        if self.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"HPN_LOG_LEVEL must be a logging level name, got {self.LOG_LEVEL!r}")
