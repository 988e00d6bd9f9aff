import functools

import pytest

from graphflow.grid import build_grid
from graphflow.manifolds import euclidean, hyperbolic, sphere
from graphflow.maps import constant_map, dilation_map, identity_map

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def sphere_grid(resolution):
    return build_grid(sphere(), resolution)


@functools.lru_cache(maxsize=None)
def torus_grid(resolution):
    return build_grid(euclidean(), resolution, "periodic")


@functools.lru_cache(maxsize=None)
def fold_field(resolution, target="sphere", c=0.5):
    N = sphere() if target == "sphere" else hyperbolic()
    return dilation_map(sphere_grid(resolution), N, c)


@pytest.fixture(scope="session")
def S2():
    return sphere()


@pytest.fixture(scope="session")
def H2():
    return hyperbolic()


@pytest.fixture(scope="session")
def grid32():
    return sphere_grid(32)


@pytest.fixture(scope="session")
def fold32():
    return fold_field(32)


@pytest.fixture(scope="session")
def const32(grid32):
    return constant_map(grid32, sphere())


@pytest.fixture(scope="session")
def ident32(grid32):
    return identity_map(grid32, sphere())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
