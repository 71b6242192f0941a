import numpy as np
import pytest

from boltzspec import KernelSpec, VelocityGrid, build_weight_table
from boltzspec.collision import CollisionWorkspace
from boltzspec.diagnostics import maxwellian
from boltzspec.grid import State


@pytest.fixture(scope="session")
def grid8():
    return VelocityGrid(3, 6.0, 8)


@pytest.fixture(scope="session")
def spec_hs():
    return KernelSpec(lam=1.0, beta=1.0, d=3)


@pytest.fixture(scope="session")
def spec_mm():
    return KernelSpec(lam=0.0, beta=1.0, d=3)


@pytest.fixture(scope="session")
def table8_hs(grid8, spec_hs):
    return build_weight_table(grid8, spec_hs)


@pytest.fixture(scope="session")
def ws8_hs(grid8, table8_hs):
    return CollisionWorkspace(grid8, table8_hs)


@pytest.fixture(scope="session")
def gauss8(grid8):
    return maxwellian(grid8, 1.0, 0.0, 1.2)


@pytest.fixture(scope="session")
def twog8(grid8):
    vals = (
        maxwellian(grid8, 0.5, [1.0, 0.0, 0.0], 1.2).values
        + maxwellian(grid8, 0.5, [-1.0, 0.0, 0.0], 1.2).values
    )
    return State(grid8, vals)


def rng(seed=0):
    return np.random.default_rng(seed)
