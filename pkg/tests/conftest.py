import functools
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from climbsim.control import ControllerMode
from climbsim.scenario import load_preset, run_simulation, scenario_model
from climbsim.spatial import reference_model


@pytest.fixture(scope="session")
def model():
    return reference_model()


@functools.lru_cache(maxsize=None)
def preset_rollout(name: str, mode: str):
    """One full preset rollout per (preset, mode), shared across the session; returns (log, seconds)."""
    sc = load_preset(name)
    t0 = time.perf_counter()
    log = run_simulation(scenario_model(sc), sc, mode=ControllerMode(mode))
    return log, time.perf_counter() - t0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
