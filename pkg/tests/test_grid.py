import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate
from scipy.special import i0

from ecl import grid
from ecl.grid import GridError, GridSpec


def test_box_spacing_and_weights():
    g = grid.box(8.0, 513)
    assert g.spacing[0] == 0.03125
    assert np.all(g.weights[1:-1] == 0.03125)
    assert g.weights[0] == g.weights[-1] == 0.015625


def test_circle_weight_with_potential():
    g = grid.circle(256, potential=lambda x: -np.cos(x))
    assert g.weights[0] == pytest.approx(2 * math.pi / 256 * math.e, rel=1e-15)
    assert g.spacing[0] == pytest.approx(2 * math.pi / 256, rel=1e-15)


def test_box_2d_tensor_quadrature():
    g = grid.box(6.0, 129, dimension=2)
    h = g.spacing[0]
    assert g.size == 16641
    assert g.weights[5, 7] == pytest.approx(h * h)
    assert g.weights[0, 7] == pytest.approx(h * h / 2)
    assert g.weights[0, 0] == pytest.approx(h * h / 4)


@pytest.mark.parametrize("spec", [
    GridSpec("truncated_box", (8.0,), (15,)),
    GridSpec("truncated_box", (0.0,), (64,)),
    GridSpec("periodic_circle", (-1.0,), (64,)),
    GridSpec("moebius", (1.0,), (64,)),
    GridSpec("periodic_circle", (2 * math.pi,), (64,), lambda x: np.where(x > 1, np.inf, 0.0)),
])
def test_build_grid_rejects(spec):
    with pytest.raises(GridError):
        grid.build_grid(spec)


def test_integrate_constant_on_circle():
    g = grid.circle(256)
    assert grid.integrate(g.field(1.0)) == pytest.approx(2 * math.pi, abs=1e-12)


def test_integrate_standard_gaussian():
    g = grid.box(8.0, 513)
    x = g.axes[0]
    phi = g.field(np.exp(-x**2 / 2) / math.sqrt(2 * math.pi))
    assert abs(grid.integrate(phi) - 1.0) < 1e-8


def test_integrate_sine_on_circle():
    g = grid.circle(256)
    assert abs(grid.integrate(g.sample(np.sin))) < 1e-12


def test_normalize_indicator():
    g = grid.box(4.0, 513)
    x = g.axes[0]
    inside = (x >= 0) & (x <= 1)
    rho = grid.normalize(g.field(inside.astype(float)))
    # interval endpoints are interior nodes with full weight: discrete mass is 65 h
    assert np.allclose(rho.values[inside], 1.0 / (65 * g.spacing[0]), rtol=1e-14, atol=0)
    assert np.all(rho.values[(x < 0) | (x > 1)] == 0)


def test_normalize_scale_invariance():
    g = grid.box(8.0, 513)
    x = g.axes[0]
    a = grid.normalize(g.field(np.exp(-x**2 / 2)))
    b = grid.normalize(g.field(2 * np.exp(-x**2 / 2)))
    assert np.allclose(a.values, b.values, rtol=1e-15, atol=0)


def test_normalize_quartic_mass():
    g = grid.box(6.0, 513)
    x = g.axes[0]
    reference, _ = sp_integrate.quad(lambda s: math.exp(-s**4), -6, 6, epsabs=1e-14)
    assert reference == pytest.approx(1.812805, abs=1e-6)
    rho = grid.normalize(g.field(np.exp(-x**4)))
    assert abs(rho.mass - 1.0) < 1e-10
    assert grid.integrate(g.field(np.exp(-x**4))) == pytest.approx(reference, rel=1e-10)


@pytest.mark.parametrize("values", [np.zeros(64), -np.ones(64)])
def test_normalize_rejects(values):
    g = grid.circle(64)
    with pytest.raises(GridError):
        grid.normalize(g.field(values))


def test_density_field_invariants():
    g = grid.circle(64)
    with pytest.raises(GridError):
        grid.DensityField(g, np.full(64, 2.0 / (2 * math.pi)))
    with pytest.raises(GridError):
        grid.ScalarField(g, np.full(64, np.nan))
    with pytest.raises(GridError):
        grid.ScalarField(g, np.ones(63))


def test_normalize_log_keeps_accurate_log():
    g = grid.box(8.0, 257)
    x = g.axes[0]
    rho = grid.normalize_log(-x**4, g)
    assert np.all(np.isfinite(rho.log_values))
    assert rho.values[0] == 0.0  # exp(-4096) underflows; its log does not
    assert np.allclose(np.exp(rho.log_values), rho.values)


def test_flatten_order_axis0_fastest():
    g = grid.box(1.0, 16, dimension=2)
    values = np.arange(256.0).reshape(16, 16)
    flat = grid.flatten(values)
    assert flat[1] == values[1, 0]
    assert np.array_equal(grid.unflatten(flat, g), values)


positive = st.floats(min_value=0.0, max_value=1e3, allow_nan=False, allow_infinity=False)


@given(st.lists(positive, min_size=32, max_size=32).filter(lambda v: sum(v) > 1e-6))
def test_normalize_idempotent(values):
    g = grid.circle(32)
    once = grid.normalize(g.field(np.array(values)))
    twice = grid.normalize(once)
    assert np.allclose(once.values, twice.values, rtol=1e-14, atol=0)


reals = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@given(reals, reals, st.lists(reals, min_size=32, max_size=32), st.lists(reals, min_size=32, max_size=32))
def test_integrate_linear(a, b, phi, psi):
    g = grid.circle(32)
    phi, psi = np.array(phi), np.array(psi)
    lhs = grid.integrate(g.field(a * phi + b * psi))
    rhs = a * grid.integrate(g.field(phi)) + b * grid.integrate(g.field(psi))
    scale = abs(a) * np.abs(phi).max() + abs(b) * np.abs(psi).max()
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300) * 2 * math.pi


def test_quadrature_order_periodic():
    errors = []
    # int_0^{2pi} exp(sin x) dx = 2 pi I0(1)
    exact = 2 * math.pi * i0(1.0)
    for n in (16, 32):
        g = grid.circle(n)
        errors.append(abs(grid.integrate(g.sample(lambda x: np.exp(np.sin(x)))) - exact))
    assert errors[1] <= errors[0] / 4 or errors[1] < 1e-14


def test_quadrature_order_box():
    exact = math.sqrt(math.pi) * math.erf(2.0)
    errors = []
    for n in (33, 65):
        g = grid.box(2.0, n)
        errors.append(abs(grid.integrate(g.sample(lambda x: np.exp(-x**2))) - exact))
    assert errors[1] <= errors[0] / 3.9
