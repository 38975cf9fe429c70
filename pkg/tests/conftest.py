import os
from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from src.parser import load_model

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture(autouse=True)
def env_vars():
    with patch.dict(os.environ, {"HPN_LOG_LEVEL": "WARNING"}, clear=False):
        for name in ("HPN_OUTPUT_DIR", "HPN_REL_TOL", "HPN_EVENT_TOL", "HPN_MAX_EVENTS", "HPN_MARKING_CAP", "HPN_JOBS"):
            os.environ.pop(name, None)
        yield


@pytest.fixture
def models_dir():
    return MODELS_DIR


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / "runs"


@pytest.fixture
def mock_config(output_dir):
    cfg = MagicMock()
    cfg.OUTPUT_DIR = output_dir
    cfg.REL_TOL = 1e-9
    cfg.EVENT_TOL = 1e-9
    cfg.MAX_EVENTS = 1_000_000
    cfg.MARKING_CAP = 10_000
    cfg.JOBS = 1
    cfg.LOG_LEVEL = "WARNING"
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tanks3():
    return load_model(MODELS_DIR / "tanks3.hpn")


@pytest.fixture
def tanks3_autonomous():
    return load_model(MODELS_DIR / "tanks3_autonomous.hpn")


@pytest.fixture
def tanks3_delem():
    return load_model(MODELS_DIR / "tanks3_delem.hpn")


@pytest.fixture
def tanks3_thresholds():
    return load_model(MODELS_DIR / "tanks3_thresholds.hpn")


@pytest.fixture
def one_tank():
    return load_model(MODELS_DIR / "one_tank.hpn")


@pytest.fixture
def tanks3_vcpn():
    return load_model(MODELS_DIR / "tanks3_vcpn.hpn")


@pytest.fixture
def argmin_switch():
    return load_model(MODELS_DIR / "argmin_switch.hpn")
