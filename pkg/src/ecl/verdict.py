"""Entropy-power curves and the concavity checks run on them.

The second derivative of ``N`` is formed from ``dH`` and ``d2H`` by the chain
rule; finite differences of the sampled ``N`` (and ``H``) are an independent
cross-check only.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bridge import Decomposition, NumericalError, interpolate
from .calculus import GeometryConfig, grad
from .functionals import DeficitReport, FunctionalReport, entropy, evaluate

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
EUCLIDEAN, WEIGHTED, COSTA_REDUCTION = "euclidean", "weighted", "costa_reduction"
DEFAULT_SAMPLES = 63
MARGIN_TOL = 1e-3
MIN_SAMPLES = 7  # smallest curve the off-centre difference stencils fit


class VerdictError(ValueError):
    """A check was requested on a geometry it does not apply to."""


def worker_count() -> int:
    """Thread cap from ``ECL_THREADS``, defaulting to the CPU count."""
    env = os.environ.get("ECL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _stencil(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for derivative ``order`` at 0 from unit-spaced ``offsets``."""
    V = np.vander(offsets.astype(float), increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _fd(values: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Derivative at the interior nodes of an extended uniform grid.

    Centered 5-point stencils where they fit. The first and last interior
    nodes use off-centre 8-point stencils: they sit next to the endpoints,
    where N varies fastest, and a 6-point stencil leaves errors of order
    one percent there.
    """
    M = values.size - 2
    if M < MIN_SAMPLES:
        raise ValueError(f"finite differences need at least {MIN_SAMPLES} interior samples")
    centered = _stencil(np.arange(-2, 3), order)
    edge = _stencil(np.arange(-1, 7), order)
    out = np.empty(M)
    for k in range(1, M + 1):
        if 2 <= k <= M - 1:
            out[k - 1] = centered @ values[k - 2:k + 3]
        elif k == 1:
            out[k - 1] = edge @ values[0:8]
        else:
            out[k - 1] = (-1) ** order * (edge @ values[M + 1:M - 7:-1])
    return out / dt**order


@dataclass(frozen=True, eq=False)
class CurveReport:
    """Per-sample functionals on ``t_k = T k/(M+1)``, ``k = 1..M``.

    ``H_endpoints`` holds the entropies of the two marginals; they extend the
    sample grid for the finite-difference columns.
    """

    t: np.ndarray
    functionals: list[FunctionalReport] = field(repr=False)
    deficits: list[DeficitReport] = field(repr=False)
    H_endpoints: tuple[float, float]
    n: int
    K: float
    euclidean: bool
    periodic: bool
    iterations: int
    residual: float

    def column(self, name: str) -> np.ndarray:
        if name in FunctionalReport.__dataclass_fields__:
            return np.array([getattr(r, name) for r in self.functionals])
        return np.array([getattr(r, name) for r in self.deficits])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else float(self.t[0])

    def _extended(self, values: np.ndarray, ends: tuple[float, float]) -> np.ndarray:
        return np.concatenate([[ends[0]], values, [ends[1]]])

    @property
    def d2N_analytic(self) -> np.ndarray:
        n = self.n
        N, dH, d2H = self.column("N"), self.column("dH"), self.column("d2H")
        return N * ((4.0 / n**2) * dH**2 + (2.0 / n) * d2H)

    @property
    def d2N_fd(self) -> np.ndarray:
        ends = tuple(math.exp(2.0 * h / self.n) for h in self.H_endpoints)
        return _fd(self._extended(self.column("N"), ends), self.dt, 2)

    @property
    def dH_fd(self) -> np.ndarray:
        return _fd(self._extended(self.column("H"), self.H_endpoints), self.dt, 1)

    @property
    def d2H_fd(self) -> np.ndarray:
        return _fd(self._extended(self.column("H"), self.H_endpoints), self.dt, 2)

    @property
    def bound(self) -> np.ndarray:
        """``(4/n^2) N I E - (2K/n) N (kinetic + I)``; the K-term vanishes when K = 0."""
        n = self.n
        N, I, E, kin = (self.column(c) for c in ("N", "I", "energy", "kinetic"))
        return (4.0 / n**2) * N * I * E - (2.0 * self.K / n) * N * (kin + I)

    @property
    def costa_bound(self) -> np.ndarray:
        """``-(4K/n) N I``, the bound when the target is the heat flow of the source."""
        return -(4.0 * self.K / self.n) * self.column("N") * self.column("I")

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.d2N_analytic

    @property
    def scaled_deficit(self) -> np.ndarray:
        """``(n / 2N)(bound - d2N)``; equals ``A1 + A2 + cs_gap``."""
        return self.n / (2.0 * self.column("N")) * self.margin

    @property
    def deficit_total(self) -> np.ndarray:
        return self.column("A1") + self.column("A2") + self.column("cs_gap")

    @property
    def deficit_identity_residual(self) -> np.ndarray:
        """Relative mismatch of the scaled deficit against its three pieces."""
        scale = self.column("A1") + self.column("A2") + np.abs(self.column("cs_gap"))
        return np.abs(self.scaled_deficit - self.deficit_total) / np.maximum(scale, 1e-300)

    @property
    def energy_drift(self) -> float:
        E = self.column("energy")
        return float(np.ptp(E))

    def tol_margin(self, base: float = MARGIN_TOL) -> float:
        return base * max(1.0, float(np.max(np.abs(self.d2N_analytic))))

    def fd_agreement(self) -> float:
        """Worst ratio of ``|d2N_fd - d2N_analytic|`` to its allowance."""
        a = self.d2N_analytic
        return float(np.max(np.abs(self.d2N_fd - a) / np.maximum(1e-3, 1e-2 * np.abs(a))))

    def entropy_fd_agreement(self) -> tuple[float, float]:
        """Worst ratios for ``dH`` and ``d2H`` against ``max(1e-4, 1e-3 |value|)``."""
        dH, d2H = self.column("dH"), self.column("d2H")
        r1 = np.abs(self.dH_fd - dH) / np.maximum(1e-4, 1e-3 * np.abs(dH))
        r2 = np.abs(self.d2H_fd - d2H) / np.maximum(1e-4, 1e-3 * np.abs(d2H))
        return float(r1.max()), float(r2.max())

    def rows(self) -> np.ndarray:
        """CSV payload in the fixed column order."""
        cols = [self.t, *(self.column(c) for c in ("H", "N", "I", "kinetic", "energy", "dH", "d2H")),
                self.d2N_analytic, self.d2N_fd, self.bound, self.margin,
                *(self.column(c) for c in ("A1", "A2", "cs_gap"))]
        return np.column_stack(cols)


CSV_COLUMNS = ("t", "H", "N", "I", "kinetic", "energy", "dH", "d2H", "d2N_analytic", "d2N_fd",
               "bound", "margin", "A1", "A2", "cs_gap")


def sample_times(T: float, samples: int) -> np.ndarray:
    return T * np.arange(1, samples + 1) / (samples + 1)


def build_curve(dec: Decomposition, geo: GeometryConfig, samples: int = DEFAULT_SAMPLES,
                threads: int | None = None) -> CurveReport:
    """Evaluate every functional on the uniform interior time grid."""
    if samples < MIN_SAMPLES:
        raise ValueError(f"a curve needs at least {MIN_SAMPLES} samples")
    times = sample_times(dec.T, samples)

    def one(t: float):
        try:
            rep, dfc = evaluate(interpolate(dec, t), geo)
        except NumericalError as exc:
            raise NumericalError(f"at t = {t:.6g}: {exc}") from exc
        if not all(np.isfinite(v) for v in (*vars(rep).values(), *vars(dfc).values())):
            raise NumericalError(f"non-finite functional at t = {t:.6g}")
        return rep, dfc

    workers = min(threads or worker_count(), samples)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, times))
    else:
        results = [one(t) for t in times]
    ends = (entropy(interpolate(dec, 0.0).rho), entropy(interpolate(dec, dec.T).rho))
    return CurveReport(
        t=times, functionals=[r for r, _ in results], deficits=[d for _, d in results],
        H_endpoints=ends, n=geo.n, K=geo.K, euclidean=geo.euclidean, periodic=geo.grid.periodic,
        iterations=dec.iterations, residual=dec.residual)


def entropy_fd_ratios(dec: Decomposition, curve: CurveReport, step: float | None = None,
                      threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Centered 5-point differences of ``H`` with spacing ``step`` around each sample.

    Returns the per-sample ratios of ``|fd - analytic|`` to
    ``max(1e-4, 1e-3 |analytic|)`` for ``dH`` and ``d2H``. Default step
    ``T/1024``; samples too close to an endpoint shrink it to fit.
    """
    T = dec.T
    step = T / 1024 if step is None else step

    def one(t: float) -> tuple[float, float]:
        h = min(step, 0.49 * t, 0.49 * (T - t))
        H = [entropy(interpolate(dec, t + j * h).rho) for j in (-2, -1, 0, 1, 2)]
        d1 = (H[0] - 8 * H[1] + 8 * H[3] - H[4]) / (12 * h)
        d2 = (-H[0] + 16 * H[1] - 30 * H[2] + 16 * H[3] - H[4]) / (12 * h**2)
        return d1, d2

    workers = min(threads or worker_count(), curve.t.size)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        fd = np.array(list(pool.map(one, curve.t)))
    dH, d2H = curve.column("dH"), curve.column("d2H")
    r1 = np.abs(fd[:, 0] - dH) / np.maximum(1e-4, 1e-3 * np.abs(dH))
    r2 = np.abs(fd[:, 1] - d2H) / np.maximum(1e-4, 1e-3 * np.abs(d2H))
    return r1, r2


@dataclass(frozen=True)
class VerdictRecord:
    scenario: str
    theorem: str
    verdict: str
    min_margin: float
    tol_margin: float
    energy_drift: float
    iterations: int
    residual: float
    K: float | None = None
    min_lhs_alternative: float | None = None

    def line(self) -> str:
        items = {
            "scenario": self.scenario, "theorem": self.theorem, "verdict": self.verdict,
            "min_margin": f"{self.min_margin:.12e}", "tol_margin": f"{self.tol_margin:.12e}",
            "energy_drift": f"{self.energy_drift:.12e}", "iterations": str(self.iterations),
            "residual": f"{self.residual:.12e}",
        }
        if self.K is not None:
            items["K"] = f"{self.K:.12e}"
        if self.min_lhs_alternative is not None:
            items["min_lhs_alternative"] = f"{self.min_lhs_alternative:.12e}"
        return " ".join(f"{k}={v}" for k, v in items.items())


def classify(min_margin: float, tol: float) -> str:
    if min_margin < -tol:
        return FAIL
    if min_margin <= tol:
        return INCONCLUSIVE
    return PASS


def _record(curve: CurveReport, theorem: str, margin: np.ndarray, scenario: str,
            tol: float | None, K: float | None) -> VerdictRecord:
    tol = curve.tol_margin() if tol is None else tol
    lhs = curve.column("lhs_alternative")
    mm = float(np.min(margin))
    return VerdictRecord(scenario, theorem, classify(mm, tol), mm, tol, curve.energy_drift,
                         curve.iterations, curve.residual, K, float(np.min(lhs)))


def check_euclidean(curve: CurveReport, scenario: str = "", tol: float | None = None) -> VerdictRecord:
    """Concavity bound ``N'' <= (4/n^2) N I E`` on flat space with ``n = m``."""
    if not curve.euclidean:
        raise VerdictError("euclidean check needs V = 0 and n = m")
    return _record(curve, EUCLIDEAN, curve.margin, scenario, tol, None)


def check_weighted(curve: CurveReport, K: float | None = None, scenario: str = "",
                   tol: float | None = None) -> VerdictRecord:
    """Bound with the curvature term ``-(2K/n) N (kinetic + I)`` on periodic grids."""
    if not curve.periodic:
        raise VerdictError("weighted check needs a periodic grid")
    if K is not None and K != curve.K:
        raise VerdictError("K differs from the curve's geometry")
    return _record(curve, WEIGHTED, curve.margin, scenario, tol, curve.K)


def check_costa(curve: CurveReport, scenario: str = "", tol: float | None = None) -> VerdictRecord:
    """``N'' <= -(4K/n) N I`` for a target that is the heat flow of the source."""
    return _record(curve, COSTA_REDUCTION, curve.costa_bound - curve.d2N_analytic, scenario, tol,
                   None if curve.euclidean else curve.K)


@dataclass(frozen=True)
class EqualityDiagnostic:
    t: float
    r_f: float
    r_g: float
    parallel_defect: float
    near_equality: bool


def equality_diagnostic(dec: Decomposition, t: float, threshold: float = 1e-3) -> EqualityDiagnostic:
    """How close the sample is to the equality regime.

    ``r_f`` and ``r_g`` are the ``L^2(rho)`` norms of ``grad log P_t f`` and
    ``grad log P_{T-t} g``; the parallelism defect is the Cauchy-Schwarz slack
    between ``grad log rho`` and ``grad theta``.
    """
    s = interpolate(dec, t)
    if s.theta is None:
        raise ValueError("diagnostic needs an interior time")
    grid = dec.grid
    W = np.where(s.mask, s.rho.values * grid.weights, 0.0)
    gf = grad(s.log_Pt_f, grid)
    gg = grad(s.log_PTt_g, grid)
    r_f = math.sqrt(float(np.sum(W * np.sum(gf**2, axis=0))))
    r_g = math.sqrt(float(np.sum(W * np.sum(gg**2, axis=0))))
    g_lr = gf + gg
    g_th = gg - gf
    a = float(np.sum(W * np.sum(g_lr**2, axis=0)))
    b = float(np.sum(W * np.sum(g_th**2, axis=0)))
    c = float(np.sum(W * np.sum(g_lr * g_th, axis=0)))
    defect = 1.0 - abs(c) / math.sqrt(a * b) if a > 0 and b > 0 else 0.0
    near = min(r_f, r_g) < threshold or defect < threshold
    return EqualityDiagnostic(float(t), r_f, r_g, defect, near)
