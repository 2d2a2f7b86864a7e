import numpy as np
import pytest
from hypothesis import settings

from ecl import bridge, calculus, grid, semigroup

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def bump_log(g, center, width):
    """Log-profile exp(-(d/w)^4) with chordal distance on periodic axes."""
    x = g.axes[0]
    d = 2.0 * np.sin((x - center) / 2.0) if g.periodic else x - center
    return -((d / width) ** 4)


def bump_density(g, center, width):
    # profile relative to Lebesgue measure, density relative to m
    return grid.normalize_log(bump_log(g, center, width) + g.potential, g)


def heat_target(op, u, T):
    return grid.normalize(semigroup.Propagator(op, T).apply(u.values), op.grid)


class Setup:
    def __init__(self, g, n):
        self.grid = g
        self.geo = calculus.GeometryConfig(g, n)
        self.op = semigroup.build_semigroup(self.geo)


@pytest.fixture(scope="session")
def box513():
    return Setup(grid.box(8.0, 513), 1)


@pytest.fixture(scope="session")
def circle_weighted():
    return Setup(grid.circle(256, potential=lambda x: -np.cos(x)), 2)


@pytest.fixture(scope="session")
def circle_flat():
    return Setup(grid.circle(256), 1)


@pytest.fixture(scope="session")
def gaussian_heat_flow(box513):
    x = box513.grid.axes[0]
    u = grid.normalize(np.exp(-x**2 / 2), box513.grid)
    v = heat_target(box513.op, u, 1.0)
    return bridge.solve_schrodinger(box513.op, u, v, 1.0)


@pytest.fixture(scope="session")
def bump_bridge(box513):
    u = bump_density(box513.grid, -3.5, 1.5)
    v = bump_density(box513.grid, 3.5, 1.5)
    return bridge.solve_schrodinger(box513.op, u, v, 1.0)


@pytest.fixture(scope="session")
def weighted_bump_bridge(circle_weighted):
    g = circle_weighted.grid
    u = bump_density(g, np.pi / 2, 1.0)
    v = bump_density(g, 3 * np.pi / 2, 1.0)
    return bridge.solve_schrodinger(circle_weighted.op, u, v, 1.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
