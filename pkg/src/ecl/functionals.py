"""Entropy, entropy power, Fisher information, energy and deficit terms.

Every integral at one time uses a single support mask (the sample's floored
support), so discrete identities among the functionals hold to rounding
rather than only in the continuum limit. Logarithms are natural (nats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bridge import DENSITY_FLOOR, Decomposition, InterpolationSample, interpolate
from .calculus import GeometryConfig, carre_du_champ2, grad, hess, witten
from .grid import DensityField


@dataclass(frozen=True)
class FunctionalReport:
    t: float
    H: float
    N: float
    I: float
    kinetic: float
    energy: float
    dH: float
    d2H: float


@dataclass(frozen=True)
class DeficitReport:
    """Nonnegative pieces of the concavity deficit at one time.

    ``lhs_alternative`` equals ``A1 + A2 + cs_gap`` up to discretization.
    """

    t: float
    lambda_star: float
    eta_star: float
    A1: float
    A2: float
    cs_gap: float
    lhs_alternative: float

    @property
    def total(self) -> float:
        return self.A1 + self.A2 + self.cs_gap


def _log_density(rho: DensityField) -> np.ndarray:
    if rho.log_values is not None:
        return rho.log_values
    with np.errstate(divide="ignore"):
        return np.log(rho.values)


def _support(rho: DensityField) -> np.ndarray:
    return rho.values > DENSITY_FLOOR * rho.values.max()


def _masked_weights(rho: DensityField, mask: np.ndarray | None = None) -> np.ndarray:
    mask = _support(rho) if mask is None else mask
    return np.where(mask, rho.values * rho.grid.weights, 0.0)


def entropy(rho: DensityField, mask: np.ndarray | None = None) -> float:
    """``-int rho log rho dm`` over the floored support."""
    W = _masked_weights(rho, mask)
    lr = np.where(W > 0, _log_density(rho), 0.0)
    return -float(np.sum(W * lr))


def entropy_power(rho: DensityField, n: int, mask: np.ndarray | None = None) -> float:
    return math.exp(2.0 * entropy(rho, mask) / n)


def _log_gradient(rho: DensityField) -> np.ndarray:
    lr = _log_density(rho)
    if not np.all(np.isfinite(lr)):
        # only reached for densities with exact zeros; those nodes are masked
        floor = np.log(DENSITY_FLOOR * rho.values.max()) - 30.0
        lr = np.maximum(lr, floor)
    return grad(lr, rho.grid)


def fisher(rho: DensityField, mask: np.ndarray | None = None) -> float:
    """``int |grad log rho|^2 rho dm`` over the floored support."""
    W = _masked_weights(rho, mask)
    return float(np.sum(W * np.sum(_log_gradient(rho) ** 2, axis=0)))


def kinetic(sample: InterpolationSample) -> float:
    """``int |velocity|^2 rho dm``."""
    if sample.velocity is None:
        raise ValueError("velocity is defined only for 0 < t < T")
    W = _masked_weights(sample.rho, sample.mask)
    return float(np.sum(W * sample.velocity.norm2()))


def evaluate(sample: InterpolationSample, geo: GeometryConfig) -> tuple[FunctionalReport, DeficitReport]:
    """All functionals and deficit terms at one interior sample.

    With ``J = int <grad log rho, grad theta> rho dm`` the entropy derivatives
    are ``dH = -J`` and ``d2H = -int (G2(theta) + G2(log rho)) rho dm``. The
    deficit uses ``lambda* = J/n`` and ``eta* = I/n``; on flat geometry with
    ``n = m`` the squares are built from the Hessian fields, otherwise from
    the curvature-dimension remainder ``G2 - K|grad|^2 - (L.)^2/n`` plus the
    trace square ``(L. + n c)^2/n``.
    """
    if sample.theta is None:
        raise ValueError("functionals need an interior time sample")
    grid, n, K = geo.grid, geo.n, geo.K
    rho = sample.rho
    W = _masked_weights(rho, sample.mask)
    lr = _log_density(rho)
    th = sample.theta.values
    g_th = sample.velocity.values
    g_lr = grad(lr, grid)

    def integral(values: np.ndarray) -> float:
        return float(np.sum(W * values))

    H = -integral(lr)
    N = math.exp(2.0 * H / n)
    I = integral(np.sum(g_lr**2, axis=0))
    kin = integral(np.sum(g_th**2, axis=0))
    J = integral(np.sum(g_lr * g_th, axis=0))
    E = 0.5 * (kin - I)

    L_th = witten(th, grid, g_th)
    L_lr = witten(lr, grid, g_lr)
    G2_th = carre_du_champ2(th, grid, g_th)
    G2_lr = carre_du_champ2(lr, grid, g_lr)
    G = integral(G2_th + G2_lr)
    report = FunctionalReport(sample.t, H, N, I, kin, E, -J, -G)

    lam, eta = J / n, I / n
    if geo.euclidean:
        eye = np.eye(grid.dimension).reshape((grid.dimension, grid.dimension) + (1,) * grid.dimension)
        A1 = integral(np.sum((hess(th, grid, g_th) + lam * eye) ** 2, axis=(0, 1)))
        A2 = integral(np.sum((hess(lr, grid, g_lr) + eta * eye) ** 2, axis=(0, 1)))
    else:
        A1 = integral(G2_th - K * np.sum(g_th**2, axis=0) - L_th**2 / n + (L_th + n * lam) ** 2 / n)
        A2 = integral(G2_lr - K * np.sum(g_lr**2, axis=0) - L_lr**2 / n + (L_lr + n * eta) ** 2 / n)
    cs_gap = (2.0 / n) * I * E - J**2 / n + I**2 / n
    lhs = G - (2.0 / n) * J**2 + (2.0 / n) * I * E - K * (kin + I)
    return report, DeficitReport(sample.t, lam, eta, A1, A2, cs_gap, lhs)


def energy(dec: Decomposition, t: float, geo: GeometryConfig | None = None) -> float:
    """``(kinetic - I)/2`` at time ``t``."""
    s = interpolate(dec, t)
    return 0.5 * (kinetic(s) - fisher(s.rho, s.mask))


def entropy_derivatives(dec: Decomposition, t: float, geo: GeometryConfig) -> tuple[float, float]:
    report, _ = evaluate(interpolate(dec, t), geo)
    return report.dH, report.d2H


def deficit(dec: Decomposition, t: float, geo: GeometryConfig) -> DeficitReport:
    return evaluate(interpolate(dec, t), geo)[1]
