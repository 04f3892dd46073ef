import numpy as np
import pytest

from mathoNet.network import MathONet
from toy_models import wire


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run the long discovery runs"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long discovery run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lorenz_z_net():
    """``xy - 8/3 z`` with one identity neuron."""
    net = MathONet(3, [1], ["identity"])
    return wire(net, [[[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, -8.0 / 3.0]]])


@pytest.fixture
def lorenz_nets():
    """The exact Lorenz right-hand side, one identity net per state."""
    x_net = wire(MathONet(3, [1], ["identity"]), [[[0, 0, 0, -10], [0, 0, 0, 10], [0, 0, 0, 0]]])
    y_net = wire(MathONet(3, [1], ["identity"]), [[[0, 0, -1, 28], [0, 0, 0, -1], [0, 0, 0, 0]]])
    z_net = wire(
        MathONet(3, [1], ["identity"]), [[[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, -8.0 / 3.0]]]
    )
    return [x_net, y_net, z_net]
