import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecl import calculus, grid
from ecl.calculus import GeometryConfig, GeometryError


def neg_cos(x):
    return -np.cos(x)


def test_fd_derivative_fourth_order():
    errors = []
    for n in (129, 257):
        g = grid.box(3.0, n)
        x = g.axes[0]
        d = calculus.diff(np.sin(x), g, 0)
        errors.append(np.max(np.abs(d - np.cos(x))))
    assert errors[1] < errors[0] / 12  # 4th order gives 16


def test_spectral_derivative_exact_for_trig():
    g = grid.circle(64)
    x = g.axes[0]
    d = calculus.diff(np.sin(3 * x) + np.cos(x), g, 0)
    assert np.max(np.abs(d - (3 * np.cos(3 * x) - np.sin(x)))) < 1e-12


def test_gamma2_flat_is_hessian_square():
    g = grid.circle(128)
    x = g.axes[0]
    phi = np.sin(x) + 0.3 * np.cos(2 * x)
    second = -np.sin(x) - 1.2 * np.cos(2 * x)
    assert np.max(np.abs(calculus.carre_du_champ2(phi, g) - second**2)) < 1e-10


def test_gamma2_weighted_bochner():
    # 1D: G2 phi = phi''^2 + V'' phi'^2
    g = grid.circle(128, potential=neg_cos)
    x = g.axes[0]
    phi = np.sin(2 * x)
    first, second = 2 * np.cos(2 * x), -4 * np.sin(2 * x)
    expected = second**2 + np.cos(x) * first**2
    assert np.max(np.abs(calculus.carre_du_champ2(phi, g) - expected)) < 1e-9


def test_generator_weighted():
    g = grid.circle(128, potential=neg_cos)
    x = g.axes[0]
    L = calculus.generator(g.field(np.cos(x))).values
    assert np.max(np.abs(L - (-np.cos(x) - np.sin(x) * -np.sin(x)))) < 1e-11


def test_generator_symmetric_in_weighted_l2():
    g = grid.circle(128, potential=neg_cos)
    x = g.axes[0]
    f, h = np.exp(np.sin(x)), np.cos(3 * x) + 0.2
    lhs = grid.integrate(g.field(calculus.witten(f, g) * h))
    rhs = -grid.integrate(g.field(calculus.diff(f, g, 0) * calculus.diff(h, g, 0)))
    assert lhs == pytest.approx(rhs, abs=1e-11)


def test_hessian_2d_mixed():
    g = grid.box(2.0, 65, dimension=2)
    X, Y = np.meshgrid(*g.axes, indexing="ij")
    H = calculus.hessian(g.field(X**2 * Y + Y**3)).values
    assert np.max(np.abs(H[0, 1] - 2 * X)) < 1e-9
    assert np.max(np.abs(H[1, 1] - 6 * Y)) < 1e-9
    assert np.array_equal(H[0, 1], H[1, 0])


def test_divergence_of_gradient_is_generator():
    g = grid.circle(64, potential=neg_cos)
    phi = g.sample(lambda x: np.sin(x) ** 2)
    assert np.allclose(calculus.divergence(calculus.gradient(phi)).values,
                       calculus.generator(phi).values, atol=1e-12)


def test_curvature_neg_cos():
    geo = GeometryConfig(grid.circle(256, potential=neg_cos), 2)
    # V'' - V'^2 = cos x - sin^2 x, minimal at cos x = -1/2
    assert geo.K == pytest.approx(-1.25, abs=1e-9)
    assert not geo.euclidean


def test_curvature_flat():
    assert GeometryConfig(grid.box(8.0, 65), 1).K == 0.0
    assert GeometryConfig(grid.box(8.0, 65), 1).euclidean
    assert GeometryConfig(grid.circle(64), 1).euclidean
    assert not GeometryConfig(grid.circle(64), 2).euclidean


@pytest.mark.parametrize("n", [0, 1])
def test_geometry_rejects(n):
    with pytest.raises(GeometryError):
        GeometryConfig(grid.circle(64, potential=neg_cos), n)


@given(st.floats(min_value=0.05, max_value=3.0), st.integers(min_value=2, max_value=6))
def test_curvature_nondecreasing_in_dimension(amplitude, n):
    g = grid.circle(64, potential=lambda x: -amplitude * np.cos(x))
    assert calculus.curvature_bound(g, n) <= calculus.curvature_bound(g, n + 1) + 1e-12


@given(st.floats(min_value=0.05, max_value=3.0))
def test_curvature_matches_closed_form(amplitude):
    # a cos x - a^2 sin^2 x over n - 1 = 1
    g = grid.circle(64, potential=lambda x: -amplitude * np.cos(x))
    c = np.linspace(-1, 1, 200001)
    exact = np.min(amplitude * c - amplitude**2 * (1 - c**2))
    assert calculus.curvature_bound(g, 2) == pytest.approx(exact, abs=1e-8)


@pytest.fixture(scope="module")
def line():
    return grid.box(8.0, 513)


@pytest.fixture(scope="module")
def ring():
    return grid.circle(256, potential=neg_cos)


def test_derivative_examples(line):
    x = line.axes[0]
    assert np.max(np.abs(calculus.diff(np.full(513, 3.0), line, 0))) < 1e-12
    # 4th-order stencils are exact on quadratics; only the two boundary cells are one-sided
    assert np.max(np.abs(calculus.diff(x**2 / 2, line, 0) - x)[2:-2]) < 1e-8
    flat = grid.circle(256)
    assert np.max(np.abs(calculus.diff(np.sin(flat.axes[0]), flat, 0) - np.cos(flat.axes[0]))) < 1e-6


def test_hessian_examples(line):
    x = line.axes[0]
    assert np.max(np.abs(calculus.hess(x**2 / 2, line)[0, 0] - 1)[2:-2]) < 1e-8
    sq = grid.box(2.0, 65, dimension=2)
    X, Y = np.meshgrid(*sq.axes, indexing="ij")
    H = calculus.hess(X * Y, sq)
    inner = (slice(2, -2), slice(2, -2))
    assert np.max(np.abs(H[0, 1][inner] - 1)) < 1e-10
    assert np.max(np.abs(H[0, 0][inner])) < 1e-10 and np.max(np.abs(H[1, 1][inner])) < 1e-10
    flat = grid.circle(256)
    xs = flat.axes[0]
    assert np.max(np.abs(calculus.hess(np.sin(xs), flat)[0, 0] + np.sin(xs))) < 1e-5


def test_generator_examples(line, ring):
    x = line.axes[0]
    assert np.max(np.abs(calculus.witten(x**2, line) - 2)[4:-4]) < 1e-8
    xs = ring.axes[0]
    L = calculus.witten(np.sin(xs), ring)
    assert np.max(np.abs(L - (-np.sin(xs) - np.sin(xs) * np.cos(xs)))) < 1e-5
    assert np.max(np.abs(calculus.witten(np.ones(256), ring))) < 1e-12


def test_gamma2_examples(line, ring):
    x = line.axes[0]
    assert np.max(np.abs(calculus.carre_du_champ2(2 * x + 1, line))[6:-6]) < 1e-8
    assert np.max(np.abs(calculus.carre_du_champ2(x**2 / 2, line) - 1)[6:-6]) < 1e-8
    xs = ring.axes[0]
    G2 = calculus.carre_du_champ2(np.sin(xs), ring)
    assert np.max(np.abs(G2 - (np.sin(xs) ** 2 + np.cos(xs) ** 3))) < 1e-4


def test_curvature_large_dimension_tends_to_minus_one():
    g = grid.circle(256, potential=neg_cos)
    values = [calculus.curvature_bound(g, n) for n in (2, 3, 4, 16, 256)]
    assert np.all(np.diff(values) >= -1e-12)
    # cos x - sin^2 x / (n - 1) is minimal at x = pi once n >= 3
    assert values[0] == pytest.approx(-1.25, abs=1e-9)
    assert np.allclose(values[1:], -1.0, atol=1e-9)


def test_trace_inequality_2d():
    # V = 0, n = m = 2; faces excluded as on box grids the boundary cells are one-sided
    sq = grid.box(6.0, 257, dimension=2)
    X, Y = np.meshgrid(*sq.axes, indexing="ij")
    phi = np.exp(-(X**2 + 2 * Y**2) / 4) * np.cos(X - Y)
    slack = calculus.carre_du_champ2(phi, sq) - calculus.witten(phi, sq) ** 2 / 2
    assert slack[6:-6, 6:-6].min() >= -1e-6
