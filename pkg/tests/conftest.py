import numpy as np
import pytest

from mmwshare import SimConfig, build_toy_topology


@pytest.fixture
def config():
    return SimConfig(num_realizations=20)


@pytest.fixture
def toy(config):
    return build_toy_topology(config)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
