import math

import pytest

from gainloss.ssh.models import ModelParams, TimeGrid
from gainloss.ssh.simulator import SSHSimulator


@pytest.fixture
def sim():
    with SSHSimulator(workers=1) as simulator:
        yield simulator


@pytest.fixture
def small_params():
    return ModelParams(n_sites=6, theta=0.1 * math.pi, gamma=0.1)


@pytest.fixture
def closed_params():
    return ModelParams(n_sites=20, theta=0.1 * math.pi, gamma=0.0)


@pytest.fixture
def nontrivial_params():
    return ModelParams(n_sites=200, theta=0.1 * math.pi, gamma=0.0)


@pytest.fixture
def trivial_params():
    return ModelParams(n_sites=200, theta=0.9 * math.pi, gamma=0.0)


@pytest.fixture
def short_grid():
    return TimeGrid(t_end=2.0, dt=0.01, sample_count=20)
