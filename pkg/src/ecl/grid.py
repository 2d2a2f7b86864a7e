"""Discretized domains, quadrature and grid-sampled fields.

Two topologies are supported: a truncated box ``[-L, L]^d`` with trapezoid
weights, and a periodic circle (or torus) with rectangle weights. Every grid
carries a potential ``V`` and integrates against the reference measure
``m = exp(-V) dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TRUNCATED_BOX = "truncated_box"
PERIODIC_CIRCLE = "periodic_circle"
TOPOLOGIES = (TRUNCATED_BOX, PERIODIC_CIRCLE)

MIN_POINTS = 16
DEFAULT_MASS_TOLERANCE = 1e-7


class GridError(ValueError):
    """Invalid grid specification or field."""


@dataclass(frozen=True)
class GridSpec:
    """Input to :func:`build_grid`.

    ``extent`` is the half-width ``L`` of each box axis, or the circumference
    of each periodic axis. ``potential`` is either an array sampled at the
    nodes or a callable evaluated on the coordinate arrays.
    """

    topology: str
    extent: tuple[float, ...]
    points: tuple[int, ...]
    potential: Callable[..., np.ndarray] | np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class Grid:
    topology: str
    extent: tuple[float, ...]
    points: tuple[int, ...]
    spacing: tuple[float, ...]
    axes: tuple[np.ndarray, ...]
    potential: np.ndarray
    quadrature: np.ndarray
    weights: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def periodic(self) -> bool:
        return self.topology == PERIODIC_CIRCLE

    @property
    def flat_potential(self) -> bool:
        return bool(np.all(self.potential == self.potential.flat[0]))

    @property
    def total_mass(self) -> float:
        """Reference mass of the whole domain, ``m(M)``."""
        return float(self.weights.sum())

    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.weights))

    def field(self, values) -> "ScalarField":
        return ScalarField(self, np.broadcast_to(np.asarray(values, dtype=float), self.shape))

    def sample(self, func: Callable[..., np.ndarray]) -> "ScalarField":
        return self.field(func(*self.coords()))


def _as_tuple(value, dim: int | None = None) -> tuple:
    if np.ndim(value) == 0:
        return (value,) * (dim or 1)
    return tuple(value)


def build_grid(spec: GridSpec) -> Grid:
    """Build a grid with precomputed quadrature and reference weights."""
    if spec.topology not in TOPOLOGIES:
        raise GridError(f"unknown topology {spec.topology!r}")
    points = tuple(int(p) for p in _as_tuple(spec.points))
    extent = tuple(float(e) for e in _as_tuple(spec.extent, len(points)))
    if len(points) not in (1, 2) or len(extent) != len(points):
        raise GridError("grids are 1D or 2D with one extent per axis")
    if min(points) < MIN_POINTS:
        raise GridError(f"point count below the resolution floor of {MIN_POINTS}")
    if not all(np.isfinite(extent)) or min(extent) <= 0:
        raise GridError("extents must be positive")

    axes, spacing, quad1d = [], [], []
    for L, n in zip(extent, points):
        if spec.topology == TRUNCATED_BOX:
            x = np.linspace(-L, L, n)
            h = 2.0 * L / (n - 1)
            q = np.full(n, h)
            q[0] = q[-1] = 0.5 * h
        else:
            h = L / n
            x = h * np.arange(n)
            q = np.full(n, h)
        axes.append(x)
        spacing.append(h)
        quad1d.append(q)

    quadrature = quad1d[0]
    for q in quad1d[1:]:
        quadrature = np.multiply.outer(quadrature, q)
    shape = tuple(points)

    if spec.potential is None:
        V = np.zeros(shape)
    elif callable(spec.potential):
        V = np.broadcast_to(
            np.asarray(spec.potential(*np.meshgrid(*axes, indexing="ij")), dtype=float), shape
        ).copy()
    else:
        V = np.asarray(spec.potential, dtype=float)
        if V.shape != shape:
            V = V.reshape(shape, order="F")
    if not np.all(np.isfinite(V)):
        raise GridError("potential has non-finite values")

    weights = quadrature * np.exp(-V)
    for arr in (V, quadrature, weights, *axes):
        arr.setflags(write=False)
    return Grid(spec.topology, extent, shape, tuple(spacing), tuple(axes), V, quadrature, weights)


def box(L: float, points: int, dimension: int = 1, potential=None) -> Grid:
    return build_grid(GridSpec(TRUNCATED_BOX, (L,) * dimension, (points,) * dimension, potential))


def circle(points: int, circumference: float = 2.0 * np.pi, potential=None) -> Grid:
    return build_grid(GridSpec(PERIODIC_CIRCLE, (circumference,), (points,), potential))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityField(ScalarField):
    """Probability density with respect to the grid's reference measure.

    ``log_values`` optionally carries an accurately computed logarithm (finite
    even where ``values`` underflows); functionals prefer it over
    ``log(values)``.
    """

    mass_tolerance: float = DEFAULT_MASS_TOLERANCE
    log_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise GridError("density has negative values")
        mass = self.grid.integrate(self.values)
        if abs(mass - 1.0) > self.mass_tolerance:
            raise GridError(f"density mass {mass!r} differs from 1 by more than {self.mass_tolerance}")
        if self.log_values is not None:
            lv = np.array(self.log_values, dtype=float)
            lv.setflags(write=False)
            object.__setattr__(self, "log_values", lv)

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)


def integrate(phi: ScalarField) -> float:
    """Integral of ``phi`` against the reference measure."""
    return phi.grid.integrate(phi.values)


def normalize(phi: ScalarField | np.ndarray, grid: Grid | None = None,
              mass_tolerance: float = DEFAULT_MASS_TOLERANCE) -> DensityField:
    """Rescale a nonnegative field to unit mass."""
    if isinstance(phi, ScalarField):
        grid, values = phi.grid, phi.values
    else:
        values = np.asarray(phi, dtype=float)
    if np.any(values < 0):
        raise GridError("cannot normalize a field with negative values")
    mass = grid.integrate(values)
    if not mass > 0:
        raise GridError("cannot normalize a field with zero mass")
    return DensityField(grid, values / mass, mass_tolerance)


def normalize_log(log_values: np.ndarray, grid: Grid,
                  mass_tolerance: float = DEFAULT_MASS_TOLERANCE) -> DensityField:
    """Density from unnormalized log-values, keeping the accurate logarithm."""
    lw = np.log(grid.weights)
    top = np.max(log_values)
    if not np.isfinite(top):
        raise GridError("cannot normalize a field with zero mass")
    log_mass = top + np.log(np.sum(np.exp(log_values - top + lw)))
    log_rho = log_values - log_mass
    return DensityField(grid, np.exp(log_rho), mass_tolerance, log_values=log_rho)


def flatten(values: np.ndarray) -> np.ndarray:
    """Node ordering used for serialization: axis 0 varies fastest."""
    return np.asarray(values).ravel(order="F")


def unflatten(values: Sequence[float], grid: Grid) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(grid.shape, order="F")
