"""Closed-form references for isotropic Gaussians.

Nothing here imports the semigroup or bridge modules, so a disagreement with
the grid pipeline isolates the fault to one side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize


@dataclass(frozen=True)
class GaussianState:
    mean: tuple[float, ...]
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def density(self, *coords: np.ndarray) -> np.ndarray:
        r2 = sum((x - m) ** 2 for x, m in zip(coords, self.mean))
        return np.exp(-r2 / (2.0 * self.variance)) / (2.0 * math.pi * self.variance) ** (self.dimension / 2)


def gaussian_functionals(gs: GaussianState, n: int | None = None) -> tuple[float, float, float]:
    """``(H, N, I)`` of an isotropic Gaussian in ``n`` dimensions."""
    n = gs.dimension if n is None else n
    H = 0.5 * n * math.log(2.0 * math.pi * math.e * gs.variance)
    return H, math.exp(2.0 * H / n), n / gs.variance


def gaussian_heat(gs: GaussianState, t: float) -> GaussianState:
    """Heat flow with kernel variance ``2t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return GaussianState(gs.mean, gs.variance + 2.0 * t)


@dataclass(frozen=True)
class GaussianBridge:
    """Centered 1D bridge with ``f ~ exp(-a x^2/2)`` and ``g ~ exp(-b x^2/2)``.

    Under heat flow ``exp(-c x^2/2)`` becomes ``exp(-c x^2/(2(1+2sc)))`` up to
    a constant, which gives every quantity below in closed form.
    """

    var0: float
    var1: float
    T: float
    a: float
    b: float

    def _precisions(self, t: float) -> tuple[float, float]:
        pf = self.a / (1.0 + 2.0 * t * self.a)
        pg = self.b / (1.0 + 2.0 * (self.T - t) * self.b)
        return pf, pg

    def variance(self, t: float) -> float:
        pf, pg = self._precisions(t)
        return 1.0 / (pf + pg)

    def density(self, t: float, x: np.ndarray) -> np.ndarray:
        s2 = self.variance(t)
        return np.exp(-x**2 / (2.0 * s2)) / math.sqrt(2.0 * math.pi * s2)

    def theta(self, t: float, x: np.ndarray) -> np.ndarray:
        """Potential up to an additive constant."""
        pf, pg = self._precisions(t)
        return 0.5 * (pf - pg) * x**2

    def kinetic(self, t: float) -> float:
        pf, pg = self._precisions(t)
        return (pf - pg) ** 2 * self.variance(t)

    def fisher(self, t: float) -> float:
        return 1.0 / self.variance(t)

    @property
    def energy(self) -> float:
        pf, pg = self._precisions(0.5 * self.T)
        return -2.0 * pf * pg / (pf + pg)


def _solve_precisions(var0: float, var1: float, T: float) -> tuple[float, float]:
    # marginal constraints: 1/var0 = a + b/(1+2Tb), 1/var1 = b + a/(1+2Ta);
    # a or b may be negative as long as 1+2Ta and 1+2Tb stay positive
    if var1 - var0 == 2.0 * T:
        return 1.0 / var0, 0.0
    if var0 - var1 == 2.0 * T:
        return 0.0, 1.0 / var1

    def a_of_b(b: float) -> float:
        return 1.0 / var0 - b / (1.0 + 2.0 * T * b)

    def second(b: float) -> float:
        a = a_of_b(b)
        return b + a / (1.0 + 2.0 * T * a) - 1.0 / var1

    def admissible(b: float) -> bool:
        return 1.0 + 2.0 * T * b > 0 and 1.0 + 2.0 * T * a_of_b(b) > 0

    floor = -0.5 / T
    scan = np.concatenate([floor + (-floor) * np.logspace(-12, 0, 400)[:-1], np.logspace(-12, 12, 800)])
    scan = np.unique(np.concatenate([scan, [0.0]]))
    pts = [(b, second(b)) for b in scan if admissible(b)]
    for (b0, s0), (b1, s1) in zip(pts, pts[1:]):
        if s0 == 0.0:
            return a_of_b(b0), b0
        if np.sign(s0) != np.sign(s1) and all(admissible(b) for b in np.linspace(b0, b1, 9)):
            b = optimize.brentq(second, b0, b1, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
            return a_of_b(b), b
    raise ValueError("no admissible Gaussian decomposition found")


def gaussian_bridge(var0: float, var1: float, T: float) -> GaussianBridge:
    """Closed-form bridge between ``N(0, var0)`` and ``N(0, var1)``."""
    if not (var0 > 0 and var1 > 0 and T > 0):
        raise ValueError("variances and horizon must be positive")
    a, b = _solve_precisions(var0, var1, T)
    return GaussianBridge(var0, var1, T, a, b)
