"""Schrödinger system solver and entropic interpolation.

The decomposition ``(f, g)`` solves ``u = f P_T g`` and ``v = g P_T f``. It is
found by alternating marginal fitting carried out entirely on logarithms, so
densities whose tails underflow double precision still produce finite,
smooth potentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import VectorField, div, grad
from .grid import DensityField, ScalarField, normalize_log
from .semigroup import SPECTRAL, Propagator, SemigroupOperator

DENSITY_FLOOR = 1e-12
GAUGE = "unit_mass_g"
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000
# spectral products are accurate only relative to their maximum; smaller
# marginal ratios leave log P_t f as rounding noise that the spectral
# derivatives inside the carre du champ amplify
SPECTRAL_DYNAMIC_RANGE = 1e-12


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach the tolerance."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


class NumericalError(RuntimeError):
    """Non-finite values appeared during a computation."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Converged pair ``(f, g)`` with ``int g dm = 1``.

    ``log_f`` and ``log_g`` are the accurate logarithms; ``f`` and ``g`` are
    their exponentials and may underflow to zero far out in the tails.
    """

    f: ScalarField
    g: ScalarField
    log_f: np.ndarray = field(repr=False)
    log_g: np.ndarray = field(repr=False)
    T: float
    semigroup: SemigroupOperator = field(repr=False)
    iterations: int
    residual: float
    trace: list[float] = field(default_factory=list, repr=False)
    gauge: str = GAUGE
    u: DensityField | None = field(default=None, repr=False)
    v: DensityField | None = field(default=None, repr=False)

    @property
    def grid(self):
        return self.semigroup.grid


@dataclass(frozen=True, eq=False)
class InterpolationSample:
    """Entropic interpolation at one time.

    ``theta`` and ``velocity`` are ``None`` at the endpoints. ``mask`` marks
    the nodes where ``rho > DENSITY_FLOOR * max(rho)``; every integral over
    the sample is restricted to it.
    """

    t: float
    rho: DensityField
    theta: ScalarField | None
    velocity: VectorField | None
    Pt_f: ScalarField
    PTt_g: ScalarField
    mask: np.ndarray = field(repr=False)
    log_Pt_f: np.ndarray = field(repr=False)
    log_PTt_g: np.ndarray = field(repr=False)


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def _density_log(d: DensityField) -> np.ndarray:
    return d.log_values if d.log_values is not None else _log(d.values)


def _log_mass(log_values: np.ndarray, log_weights: np.ndarray) -> float:
    a = log_values + log_weights
    top = np.max(a)
    if not np.isfinite(top):
        return -np.inf
    return float(top + np.log(np.sum(np.exp(a - top))))


def _divide_log(log_num: np.ndarray, log_den: np.ndarray) -> np.ndarray:
    # zero numerator forces zero; positive numerator sees a floored denominator
    out = log_num - np.maximum(log_den, np.log(1e-300))
    return np.where(np.isneginf(log_num), -np.inf, out)


def _l1(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(np.abs(values) * weights))


def marginal_residuals(dec: Decomposition, u: DensityField, v: DensityField) -> tuple[float, float]:
    """``(||f P_T g - u||_1, ||g P_T f - v||_1)`` in ``L^1(m)``."""
    prop = Propagator(dec.semigroup, dec.T)
    w = dec.grid.weights
    ru = _l1(np.exp(dec.log_f + prop.apply_log(dec.log_g)) - u.values, w)
    rv = _l1(np.exp(dec.log_g + prop.apply_log(dec.log_f)) - v.values, w)
    return ru, rv


def solve_schrodinger(op: SemigroupOperator, u: DensityField, v: DensityField, T: float,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      g0_scale: float = 1.0) -> Decomposition:
    """Alternating marginal fitting ``f <- u / P_T g``, ``g <- v / P_T f``.

    Starts from ``g = g0_scale``. After each ``f`` update the first marginal is
    exact, so the recorded residual is the ``L^1(m)`` error of the second.

    Raises
    ------
    ValueError
        On periodic grids, a marginal whose min/max ratio is below
        ``SPECTRAL_DYNAMIC_RANGE``.
    ConvergenceError
        Residual above ``tol`` after ``max_iter`` sweeps; carries the trace.
    NumericalError
        NaN encountered; carries the iteration index.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if not g0_scale > 0:
        raise ValueError("initial scale must be positive")
    grid = op.grid
    if op.representation == SPECTRAL:
        for name, d in (("u", u), ("v", v)):
            if d.values.min() < SPECTRAL_DYNAMIC_RANGE * d.values.max():
                raise ValueError(f"marginal {name} spans more than the spectral dynamic range "
                                 f"{SPECTRAL_DYNAMIC_RANGE:.0e}")
    w = grid.weights
    lw = np.log(w)
    prop = Propagator(op, T)
    log_u, log_v = _density_log(u), _density_log(v)
    log_g = np.full(grid.shape, np.log(g0_scale))
    trace: list[float] = []
    for it in range(1, max_iter + 1):
        log_f = _divide_log(log_u, prop.apply_log(log_g))
        log_Pf = prop.apply_log(log_f)
        residual = _l1(np.exp(log_g + log_Pf) - v.values, w)
        if np.isnan(residual) or np.any(np.isnan(log_f)):
            raise NumericalError(f"NaN in Schrödinger iteration {it}", it)
        trace.append(residual)
        log_g = _divide_log(log_v, log_Pf)
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"residual {trace[-1]:.3e} above {tol:.1e} after {max_iter} iterations", trace)

    # the g update made the second marginal exact; re-measure the first
    residual = _l1(np.exp(log_f + prop.apply_log(log_g)) - u.values, w)
    shift = _log_mass(log_g, lw)
    log_g = log_g - shift
    log_f = log_f + shift
    return Decomposition(
        f=ScalarField(grid, np.exp(log_f)), g=ScalarField(grid, np.exp(log_g)),
        log_f=log_f, log_g=log_g, T=float(T), semigroup=op, iterations=it,
        residual=max(residual, trace[-1]),
        trace=trace, u=u, v=v)


def interpolate(dec: Decomposition, t: float, mass_tolerance: float | None = None) -> InterpolationSample:
    """``rho_t = P_t f P_{T-t} g`` with its potential and velocity.

    ``theta = log P_{T-t} g - log P_t f`` and ``velocity = grad theta`` are
    returned only for ``0 < t < T``.
    """
    T = dec.T
    if not 0.0 <= t <= T:
        raise ValueError(f"t = {t} outside [0, {T}]")
    grid = dec.grid
    log_pf = Propagator(dec.semigroup, t).apply_log(dec.log_f)
    log_pg = Propagator(dec.semigroup, T - t).apply_log(dec.log_g)
    log_rho = log_pf + log_pg
    kwargs = {} if mass_tolerance is None else {"mass_tolerance": mass_tolerance}
    rho = normalize_log(log_rho, grid, **kwargs)
    mask = rho.values > DENSITY_FLOOR * rho.values.max()
    theta = velocity = None
    if 0.0 < t < T:
        if not (np.all(np.isfinite(log_pf)) and np.all(np.isfinite(log_pg))):
            raise NumericalError(f"semigroup lost positivity at t = {t}")
        th = log_pg - log_pf
        theta = ScalarField(grid, th)
        velocity = VectorField(grid, grad(th, grid))
    return InterpolationSample(
        t=float(t), rho=rho, theta=theta, velocity=velocity,
        Pt_f=ScalarField(grid, np.exp(log_pf)), PTt_g=ScalarField(grid, np.exp(log_pg)),
        mask=mask, log_Pt_f=log_pf, log_PTt_g=log_pg)


def continuity_residual(dec: Decomposition, t: float, dt: float | None = None) -> float:
    """``||d_t rho + div(rho v)||_1`` with a centered difference in time.

    The divergence is taken with respect to the reference measure, so the
    expression vanishes for the exact flow on weighted grids too.
    """
    dt = dec.T / 512 if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("time step must be positive")
    if not (0.0 < t - dt and t + dt < dec.T):
        raise ValueError("t +- dt must lie inside (0, T)")
    grid = dec.grid
    mid = interpolate(dec, t)
    ahead = interpolate(dec, t + dt).rho.values
    behind = interpolate(dec, t - dt).rho.values
    flux = mid.rho.values[None, ...] * mid.velocity.values
    r = (ahead - behind) / (2.0 * dt) + div(flux, grid)
    return _l1(r, grid.weights)
