"""Scenario configuration: a flat ``key = value`` text format.

One assignment per line, dotted keys, ``#`` starts a comment. Example::

    scenario = bumps_T1
    geometry.topology = truncated_box
    geometry.extent = 8
    geometry.points = 513
    geometry.n = 1
    T = 1
    marginal.mu.family = bump
    marginal.mu.center = -3.5
    marginal.mu.width = 1.5
    marginal.nu.family = heat_of
    marginal.nu.source = mu

Marginal families give a profile ``p`` relative to Lebesgue measure; the
density handed to the solver is ``p exp(V)`` normalized in ``L^1(m)``, so the
configured law is the same whatever the potential. On the circle, distances
are chordal (``2 sin(d/2)``) so every profile is smooth and periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import (PERIODIC_CIRCLE, TRUNCATED_BOX, DensityField, Grid, GridSpec, build_grid,
                   normalize, normalize_log, unflatten)
from .verdict import MIN_SAMPLES

FAMILIES = ("gaussian", "bump", "uniform", "mixture", "heat_of", "file")
POTENTIALS = ("zero", "neg_cos", "fourier")
SUPPORT_LEVEL = 1e-4  # relative density level that bounds a marginal's bulk
SUPPORT_MARGIN = 0.1  # fraction of the half-width kept free at each box face


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def parse(text: str) -> dict[str, str]:
    """Parse the flat format into an ordered ``{key: raw value}`` mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


class _Reader:
    """Typed access to the raw mapping that remembers which keys were used."""

    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.raw

    def str(self, key: str, default: str | None = None) -> str:
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return default
        self.used.add(key)
        return self.raw[key]

    def float(self, key: str, default: float | None = None) -> float:
        if key not in self.raw and default is not None:
            return default
        text = self.str(key)
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{key}: {text!r} is not a number") from None
        if not math.isfinite(value):
            raise ConfigError(f"{key}: value must be finite")
        return value

    def int(self, key: str, default: int | None = None) -> int:
        value = self.float(key, None if default is None else float(default))
        if value != int(value):
            raise ConfigError(f"{key}: expected an integer")
        return int(value)

    def floats(self, key: str, default: tuple[float, ...] | None = None) -> tuple[float, ...]:
        if key not in self.raw and default is not None:
            return default
        parts = [p.strip() for p in self.str(key).split(",")]
        try:
            values = tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated numbers") from None
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"{key}: values must be finite")
        return values

    def bool(self, key: str, default: bool) -> bool:
        if key not in self.raw:
            return default
        text = self.str(key).lower()
        if text in ("true", "yes", "1"):
            return True
        if text in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected true or false")


@dataclass(frozen=True)
class GeometryBlock:
    topology: str
    extent: tuple[float, ...]
    points: tuple[int, ...]
    potential: str = "zero"
    cos_coefficients: tuple[float, ...] = ()
    sin_coefficients: tuple[float, ...] = ()
    n: int = 1
    normalize_measure: bool = False


@dataclass(frozen=True)
class MarginalSpec:
    family: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    geometry: GeometryBlock
    mu: MarginalSpec
    nu: MarginalSpec
    T: float
    tol: float = 1e-10
    max_iter: int = 10000
    samples: int = 63
    tol_margin: float | None = None
    csv: str = ""
    report: str = ""
    sweep_T: tuple[float, ...] = ()
    t_star: float = 0.5
    base_dir: Path = Path(".")

    @property
    def heat_reduction(self) -> bool:
        """Target is the heat flow of the source over the full horizon, either way round."""
        for a, b in (("mu", self.nu), ("nu", self.mu)):
            if b.family == "heat_of" and b.params["source"] == a and b.params["time"] == self.T:
                return True
        return False


def _geometry(r: _Reader) -> GeometryBlock:
    topology = r.str("geometry.topology")
    if topology not in (TRUNCATED_BOX, PERIODIC_CIRCLE):
        raise ConfigError(f"geometry.topology must be {TRUNCATED_BOX} or {PERIODIC_CIRCLE}")
    dim = r.int("geometry.dimension", 1)
    if dim not in (1, 2):
        raise ConfigError("geometry.dimension must be 1 or 2")
    default_extent = (2.0 * math.pi,) if topology == PERIODIC_CIRCLE else None
    extent = r.floats("geometry.extent", default_extent)
    points = tuple(int(p) for p in r.floats("geometry.points"))
    if any(p != int(p) for p in r.floats("geometry.points")):
        raise ConfigError("geometry.points must be integers")
    extent = extent * dim if len(extent) == 1 else extent
    points = points * dim if len(points) == 1 else points
    if len(extent) != dim or len(points) != dim:
        raise ConfigError("geometry.extent and geometry.points need one value or one per axis")
    potential = r.str("geometry.potential", "zero")
    if potential not in POTENTIALS:
        raise ConfigError(f"geometry.potential must be one of {', '.join(POTENTIALS)}")
    cos_c = r.floats("geometry.potential.cos", ())
    sin_c = r.floats("geometry.potential.sin", ())
    if potential == "fourier" and not (cos_c or sin_c):
        raise ConfigError("fourier potential needs geometry.potential.cos or geometry.potential.sin")
    if potential != "zero" and topology != PERIODIC_CIRCLE:
        raise ConfigError("a nonzero potential needs a periodic grid")
    n = r.int("geometry.n", dim)
    return GeometryBlock(topology, extent, points, potential, cos_c, sin_c, n,
                         r.bool("geometry.normalize_measure", False))


def _marginal(r: _Reader, name: str, dim: int, depth: int = 0) -> MarginalSpec:
    prefix = f"marginal.{name}."
    family = r.str(prefix + "family")
    if family not in FAMILIES:
        raise ConfigError(f"{prefix}family must be one of {', '.join(FAMILIES)}")
    p: dict = {}
    if family == "gaussian":
        p["mean"] = r.floats(prefix + "mean", (0.0,) * dim)
        p["var"] = r.float(prefix + "var")
        if p["var"] <= 0:
            raise ConfigError(f"{prefix}var must be positive")
    elif family == "bump":
        p["center"] = r.floats(prefix + "center", (0.0,) * dim)
        p["width"] = r.float(prefix + "width")
        if p["width"] <= 0:
            raise ConfigError(f"{prefix}width must be positive")
    elif family == "uniform":
        p["a"], p["b"] = r.float(prefix + "a"), r.float(prefix + "b")
        if not p["a"] < p["b"]:
            raise ConfigError(f"{prefix}a must be below {prefix}b")
    elif family == "mixture":
        if depth > 0:
            raise ConfigError("mixtures cannot nest")
        count = r.int(prefix + "components")
        if count < 1:
            raise ConfigError(f"{prefix}components must be positive")
        comps = []
        for i in range(count):
            sub = _marginal(r, f"{name}.{i}", dim, depth + 1)
            if sub.family in ("heat_of", "file"):
                raise ConfigError("mixture components must be parametric")
            w = r.float(f"marginal.{name}.{i}.weight", 1.0)
            if w <= 0:
                raise ConfigError(f"marginal.{name}.{i}.weight must be positive")
            comps.append((w, sub))
        p["components"] = tuple(comps)
    elif family == "heat_of":
        p["source"] = r.str(prefix + "source")
        if p["source"] == name or p["source"] not in ("mu", "nu"):
            raise ConfigError(f"{prefix}source must name the other marginal")
        p["time"] = r.float(prefix + "time", -1.0)
    elif family == "file":
        p["path"] = r.str(prefix + "path")
    return MarginalSpec(family, p)


def load(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return from_text(text, base_dir=path.parent, default_name=path.stem)


def from_text(text: str, base_dir: Path = Path("."), default_name: str = "scenario") -> ScenarioConfig:
    r = _Reader(parse(text))
    geometry = _geometry(r)
    dim = len(geometry.points)
    T = r.float("T")
    if not T > 0:
        raise ConfigError("T must be positive")
    mu, nu = _marginal(r, "mu", dim), _marginal(r, "nu", dim)
    for spec in (mu, nu):
        if spec.family == "heat_of":
            if spec.params["time"] == -1.0:
                spec.params["time"] = T
            if spec.params["time"] < 0:
                raise ConfigError("heat_of time must be nonnegative")
    if mu.family == "heat_of" and nu.family == "heat_of":
        raise ConfigError("at most one marginal may be a heat flow of the other")
    name = r.str("scenario", default_name)
    tm = r.float("curve.tol_margin", -1.0)
    cfg = ScenarioConfig(
        scenario=name, geometry=geometry, mu=mu, nu=nu, T=T,
        tol=r.float("solver.tol", 1e-10), max_iter=r.int("solver.max_iter", 10000),
        samples=r.int("curve.samples", 63), tol_margin=None if tm < 0 else tm,
        csv=r.str("output.csv", f"{name}.csv"), report=r.str("output.report", f"{name}.verdict"),
        sweep_T=r.floats("sweep.T", ()), t_star=r.float("sweep.t_star", 0.5), base_dir=base_dir)
    if cfg.tol <= 0 or cfg.max_iter < 1:
        raise ConfigError("solver.tol must be positive and solver.max_iter at least 1")
    if cfg.samples < MIN_SAMPLES:
        raise ConfigError(f"curve.samples must be at least {MIN_SAMPLES}")
    unknown = set(r.raw) - r.used
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    return cfg


# --- materialization -----------------------------------------------------


def build_potential(g: GeometryBlock):
    """Callable for :class:`GridSpec` or ``None`` for ``V = 0``."""
    if g.potential == "zero":
        base = None
    elif g.potential == "neg_cos":
        def base(*xs):
            return -sum(np.cos(2.0 * math.pi * x / L) for x, L in zip(xs, g.extent))
    else:
        def base(*xs):
            out = np.zeros_like(xs[0])
            for x, L in zip(xs, g.extent):
                theta = 2.0 * math.pi * x / L
                for k, c in enumerate(g.cos_coefficients, 1):
                    out = out + c * np.cos(k * theta)
                for k, s in enumerate(g.sin_coefficients, 1):
                    out = out + s * np.sin(k * theta)
            return out
    if not g.normalize_measure:
        return base
    # shift V by the log of the total reference mass so that m(M) = 1
    probe = build_grid(GridSpec(g.topology, g.extent, g.points, base))
    shift = math.log(probe.total_mass)

    def shifted(*xs):
        return (0.0 if base is None else base(*xs)) + shift + 0.0 * xs[0]

    return shifted


def build_scenario_grid(cfg: ScenarioConfig) -> Grid:
    g = cfg.geometry
    return build_grid(GridSpec(g.topology, g.extent, g.points, build_potential(g)))


def _distance2(grid: Grid, center: tuple[float, ...]) -> np.ndarray:
    if len(center) != grid.dimension:
        raise ConfigError("center or mean needs one coordinate per axis")
    coords = grid.coords()
    out = np.zeros(grid.shape)
    for x, c, L in zip(coords, center, grid.extent):
        if grid.periodic:
            # chordal distance on a circle of circumference L, scaled to arc length near c
            R = L / (2.0 * math.pi)
            out = out + (2.0 * R * np.sin((x - c) / (2.0 * R))) ** 2
        else:
            out = out + (x - c) ** 2
    return out


def log_profile(spec: MarginalSpec, grid: Grid) -> np.ndarray:
    """Unnormalized log of a parametric profile relative to Lebesgue measure."""
    p = spec.params
    if spec.family == "gaussian":
        return -_distance2(grid, p["mean"]) / (2.0 * p["var"])
    if spec.family == "bump":
        return -((_distance2(grid, p["center"]) / p["width"] ** 2) ** 2)
    if spec.family == "uniform":
        inside = np.ones(grid.shape, dtype=bool)
        for x in grid.coords():
            inside &= (x >= p["a"]) & (x <= p["b"])
        if not inside.any():
            raise ConfigError("uniform interval contains no grid node")
        with np.errstate(divide="ignore"):
            return np.log(inside.astype(float))
    if spec.family == "mixture":
        logs = []
        total = sum(w for w, _ in p["components"])
        for w, sub in p["components"]:
            lp = log_profile(sub, grid)
            # each component normalized before weighting
            top = np.max(lp)
            lz = top + math.log(float(np.sum(np.exp(lp - top) * grid.quadrature)))
            logs.append(lp - lz + math.log(w / total))
        stack = np.stack(logs)
        top = np.max(stack, axis=0)
        return top + np.log(np.sum(np.exp(stack - top), axis=0))
    raise ConfigError(f"family {spec.family!r} has no closed-form profile")


def _check_support(density: DensityField, name: str) -> None:
    grid = density.grid
    if grid.periodic:
        return
    support = density.values >= SUPPORT_LEVEL * density.values.max()
    for x, L in zip(grid.coords(), grid.extent):
        if np.any(np.abs(x[support]) > (1.0 - SUPPORT_MARGIN) * L):
            raise ConfigError(f"marginal {name} reaches within {SUPPORT_MARGIN:.0%} of the box face")


def marginal_density(spec: MarginalSpec, grid: Grid, name: str, base_dir: Path) -> DensityField:
    """Density relative to ``m`` for a non-derived family."""
    if spec.family == "file":
        path = base_dir / spec.params["path"]
        try:
            values = np.array(path.read_text(encoding="utf-8").split(), dtype=float)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read marginal file {path}: {exc}") from None
        if values.size != grid.size:
            raise ConfigError(f"marginal file has {values.size} values, grid has {grid.size} nodes")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ConfigError("marginal file values must be finite and nonnegative")
        try:
            density = normalize(unflatten(values, grid), grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        density = normalize_log(log_profile(spec, grid) + grid.potential, grid)
    _check_support(density, name)
    return density
