import copy
import logging

import pytest

from config import DEFAULT_CONFIG
from netspec import BSpline, Chebyshev, Fourier, Grbf, Mlp, QuantConfig, build_network


@pytest.fixture
def quant8():
    return QuantConfig()


@pytest.fixture
def reference_families():
    """The comparison setting: B-spline k=3 G=5, GRBF N_c=5, Chebyshev n=5, Fourier G=5."""
    return {
        "bspline": BSpline(3, 5),
        "grbf": Grbf.uniform(5),
        "chebyshev": Chebyshev(5),
        "fourier": Fourier(5),
    }


@pytest.fixture
def fig1_bspline():
    return build_network([3, 16, 16, 2], BSpline(3, 5), name="fig1_bspline")


@pytest.fixture
def fig1_mlp():
    return build_network([3, 16, 16, 2], Mlp(), name="fig1_mlp")


@pytest.fixture
def baseline_mlp():
    return build_network([3, 64, 64, 2], Mlp(), name="baseline")


@pytest.fixture
def config():
    return copy.deepcopy(DEFAULT_CONFIG)


@pytest.fixture
def logger():
    return logging.getLogger("kan_hwcost.tests")
