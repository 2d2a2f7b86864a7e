"""Differential operators on grid fields.

Periodic axes are differentiated spectrally (FFT); box axes use fourth-order
central differences with one-sided fourth-order closures on the two nodes
nearest to each face. Second derivatives are compositions of first
derivatives, so the Hessian, the Witten generator and the iterated carre du
champ are all built from one primitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .grid import Grid, ScalarField


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (d, *grid.shape)

    def __post_init__(self):
        if self.values.shape != (self.grid.dimension, *self.grid.shape):
            raise ValueError("vector field shape mismatch")

    def norm2(self) -> np.ndarray:
        return np.sum(self.values**2, axis=0)


@dataclass(frozen=True, eq=False)
class MatrixField:
    grid: Grid
    values: np.ndarray  # shape (d, d, *grid.shape), symmetric in the first two axes

    def hs_norm2(self) -> np.ndarray:
        return np.sum(self.values**2, axis=(0, 1))

    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=0, axis2=1)


# --- first derivative along one axis -------------------------------------

_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def _fd_axis0(f: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(f)
    g[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / 12.0
    g[0] = np.tensordot(_EDGE0, f[:5], axes=1)
    g[1] = np.tensordot(_EDGE1, f[:5], axes=1)
    g[-1] = -np.tensordot(_EDGE0, f[::-1][:5], axes=1)
    g[-2] = -np.tensordot(_EDGE1, f[::-1][:5], axes=1)
    return g / h


def _wavenumbers(n: int, period: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.rfftfreq(n, d=period / n)


def _spectral_axis0(f: np.ndarray, period: float) -> np.ndarray:
    n = f.shape[0]
    k = _wavenumbers(n, period)
    symbol = 1j * k
    if n % 2 == 0:
        symbol[-1] = 0.0
    fh = np.fft.rfft(f, axis=0)
    fh *= symbol.reshape((-1,) + (1,) * (f.ndim - 1))
    return np.fft.irfft(fh, n=n, axis=0)


def diff(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """First derivative of nodal values along ``axis``."""
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if grid.periodic:
        g = _spectral_axis0(f, grid.extent[axis])
    else:
        g = _fd_axis0(f, grid.spacing[axis])
    return np.moveaxis(g, 0, axis)


def grad(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.stack([diff(values, grid, a) for a in range(grid.dimension)])


def hess(values: np.ndarray, grid: Grid, first: np.ndarray | None = None) -> np.ndarray:
    d = grid.dimension
    g = grad(values, grid) if first is None else first
    out = np.empty((d, d, *grid.shape))
    for a in range(d):
        for b in range(a, d):
            out[a, b] = diff(g[b], grid, a)
            if b != a:
                out[a, b] = 0.5 * (out[a, b] + diff(g[a], grid, b))
                out[b, a] = out[a, b]
    return out


def div(vector: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence with respect to the reference measure, ``div X - <grad V, X>``."""
    out = sum(diff(vector[a], grid, a) for a in range(grid.dimension))
    if not grid.flat_potential:
        out = out - np.sum(grad(grid.potential, grid) * vector, axis=0)
    return out


def witten(values: np.ndarray, grid: Grid, first: np.ndarray | None = None) -> np.ndarray:
    """``L phi = Laplacian phi - <grad V, grad phi>`` on nodal values."""
    g = grad(values, grid) if first is None else first
    return div(g, grid)


def carre_du_champ2(values: np.ndarray, grid: Grid, first: np.ndarray | None = None) -> np.ndarray:
    """Iterated carre du champ ``1/2 L|grad phi|^2 - <grad phi, grad L phi>``."""
    g = grad(values, grid) if first is None else first
    Lphi = witten(values, grid, g)
    return 0.5 * witten(np.sum(g**2, axis=0), grid) - np.sum(g * grad(Lphi, grid), axis=0)


# --- field-level API -----------------------------------------------------


def gradient(phi: ScalarField) -> VectorField:
    return VectorField(phi.grid, grad(phi.values, phi.grid))


def hessian(phi: ScalarField) -> MatrixField:
    return MatrixField(phi.grid, hess(phi.values, phi.grid))


def divergence(X: VectorField) -> ScalarField:
    return ScalarField(X.grid, div(X.values, X.grid))


def generator(phi: ScalarField, geo: "GeometryConfig | None" = None) -> ScalarField:
    return ScalarField(phi.grid, witten(phi.values, phi.grid))


def gamma2(phi: ScalarField, geo: "GeometryConfig | None" = None) -> ScalarField:
    return ScalarField(phi.grid, carre_du_champ2(phi.values, phi.grid))


# --- curvature-dimension bound -------------------------------------------


def _smallest_eig(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 1:
        return m[0, 0]
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b**2)


def _ricci_matrix(hV: np.ndarray, gV: np.ndarray, n: int, m: int) -> np.ndarray:
    if n == m:
        return hV
    return hV - np.einsum("a...,b...->ab...", gV, gV) / (n - m)


class _TrigInterpolant:
    """Real trigonometric interpolant of periodic nodal data, with derivatives."""

    def __init__(self, values: np.ndarray, grid: Grid):
        self.coef = np.fft.fftn(values) / values.size
        self.k = [np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / P)
                  for n, P in zip(grid.points, grid.extent)]
        self.nyq = [n // 2 if n % 2 == 0 else None for n in grid.points]

    def _basis(self, axis: int, x: float, order: int) -> np.ndarray:
        k = self.k[axis]
        e = (1j * k) ** order * np.exp(1j * k * x)
        j = self.nyq[axis]
        if j is not None:
            kn = abs(k[j])
            # Nyquist mode taken as cos(kn x) so the interpolant is real
            e[j] = kn**order * np.cos(kn * x + 0.5 * np.pi * order)
        return e

    def __call__(self, point, orders) -> float:
        out = self.coef
        for axis in reversed(range(len(point))):
            out = out @ self._basis(axis, point[axis], orders[axis])
        return float(np.real(out))


def _refine_periodic(grid: Grid, n: int, start: tuple[float, ...]) -> float:
    d, m = grid.dimension, grid.dimension
    interp = _TrigInterpolant(grid.potential, grid)

    def objective(p):
        gV = np.array([interp(p, tuple(int(a == i) for a in range(d))) for i in range(d)])
        hV = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                orders = [0] * d
                orders[i] += 1
                orders[j] += 1
                hV[i, j] = interp(p, tuple(orders))
        return float(_smallest_eig(_ricci_matrix(hV, gV, n, m)))

    h = grid.spacing
    if d == 1:
        res = optimize.minimize_scalar(lambda x: objective((x,)), bounds=(start[0] - h[0], start[0] + h[0]),
                                       method="bounded", options={"xatol": 1e-12})
        return min(res.fun, objective(start))
    res = optimize.minimize(objective, np.array(start), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14})
    return min(res.fun, objective(start))


def curvature_bound(grid: Grid, n: int) -> float:
    """Lower Ricci bound ``K`` for ``Hess V - grad V (x) grad V / (n - m)``.

    Minimum over nodes of the smallest eigenvalue; on periodic grids the
    minimum is refined on the trigonometric interpolant of ``V``.
    """
    m = grid.dimension
    if n < m:
        raise GeometryError(f"effective dimension {n} below manifold dimension {m}")
    if grid.flat_potential:
        return 0.0
    if n == m:
        raise GeometryError("n = m requires a constant potential")
    gV = grad(grid.potential, grid)
    hV = hess(grid.potential, grid, gV)
    lam = _smallest_eig(_ricci_matrix(hV, gV, n, m))
    K = float(lam.min())
    if grid.periodic:
        idx = np.unravel_index(np.argmin(lam), grid.shape)
        start = tuple(ax[i] for ax, i in zip(grid.axes, idx))
        K = min(K, _refine_periodic(grid, n, start))
    return K


@dataclass(frozen=True, eq=False)
class GeometryConfig:
    grid: Grid
    n: int
    K: float = field(init=False)

    def __post_init__(self):
        if self.n < self.grid.dimension:
            raise GeometryError(f"effective dimension {self.n} below manifold dimension {self.grid.dimension}")
        if self.n == self.grid.dimension and not self.grid.flat_potential:
            raise GeometryError("n = m requires a constant potential")
        object.__setattr__(self, "K", curvature_bound(self.grid, self.n))

    @property
    def euclidean(self) -> bool:
        """Flat metric, constant potential and n = m."""
        return self.grid.flat_potential and self.n == self.grid.dimension
