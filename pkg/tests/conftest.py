import dataclasses

import numpy as np
import pytest

from uavtp.config import ScenarioConfig


@pytest.fixture
def cfg():
    """Default scenario: 30x30 grid, 50 users."""
    return ScenarioConfig()


@pytest.fixture
def small_cfg():
    """Cheap world for fuzz-style tests."""
    return ScenarioConfig(grid_k=6, n_gus=4, max_steps_per_episode=50)


def replace(cfg, **kwargs):
    return dataclasses.replace(cfg, **kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
