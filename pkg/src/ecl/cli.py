"""Command-line driver: ``ecl run`` and ``ecl sweep-T``.

Exit codes: 0 every verdict PASS or INCONCLUSIVE, 1 invalid configuration
(nothing written), 2 solver non-convergence, 3 some verdict FAIL,
4 non-finite numbers.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bridge import ConvergenceError, Decomposition, NumericalError, interpolate, solve_schrodinger
from .calculus import GeometryConfig, GeometryError
from .config import (ConfigError, ScenarioConfig, build_scenario_grid, load, marginal_density)
from .functionals import evaluate
from .grid import DensityField, GridError, normalize
from .semigroup import Propagator, SemigroupError, SemigroupOperator, build_semigroup
from .verdict import (CSV_COLUMNS, FAIL, MIN_SAMPLES, CurveReport, VerdictRecord, build_curve, check_costa,
                      check_euclidean, check_weighted, worker_count)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_FAIL, EXIT_NUMERIC = 0, 1, 2, 3, 4


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    geometry: GeometryConfig
    semigroup: SemigroupOperator
    u: DensityField
    v: DensityField


@dataclass(frozen=True, eq=False)
class Outcome:
    scenario: Scenario
    decomposition: Decomposition
    curve: CurveReport
    verdicts: list[VerdictRecord]


def prepare(cfg: ScenarioConfig, T: float | None = None) -> Scenario:
    """Grid, geometry and both marginals; raises ``ConfigError`` on any invalid input."""
    T = cfg.T if T is None else T
    try:
        grid = build_scenario_grid(cfg)
        geo = GeometryConfig(grid, cfg.geometry.n)
        op = build_semigroup(geo)
        dens: dict[str, DensityField] = {}
        specs = {"mu": cfg.mu, "nu": cfg.nu}
        for name, spec in specs.items():
            if spec.family != "heat_of":
                dens[name] = marginal_density(spec, grid, name, cfg.base_dir)
        for name, spec in specs.items():
            if spec.family == "heat_of":
                src = dens[spec.params["source"]]
                time = T if spec.params["time"] == cfg.T else spec.params["time"]
                dens[name] = normalize(Propagator(op, time).apply(src.values), grid)
    except (GridError, GeometryError, SemigroupError) as exc:
        raise ConfigError(str(exc)) from None
    return Scenario(cfg, geo, op, dens["mu"], dens["nu"])


def verdicts_for(cfg: ScenarioConfig, curve: CurveReport) -> list[VerdictRecord]:
    tol = cfg.tol_margin
    tol = None if tol is None else tol * max(1.0, float(np.max(np.abs(curve.d2N_analytic))))
    out = []
    if curve.periodic:
        out.append(check_weighted(curve, scenario=cfg.scenario, tol=tol))
    elif curve.euclidean:
        out.append(check_euclidean(curve, scenario=cfg.scenario, tol=tol))
    if cfg.heat_reduction:
        out.append(check_costa(curve, scenario=cfg.scenario, tol=tol))
    return out


def execute(cfg: ScenarioConfig, threads: int | None = None) -> Outcome:
    sc = prepare(cfg)
    op = sc.semigroup
    try:
        dec = solve_schrodinger(op, sc.u, sc.v, cfg.T, tol=cfg.tol, max_iter=cfg.max_iter)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    curve = build_curve(dec, sc.geometry, cfg.samples, threads=threads)
    return Outcome(sc, dec, curve, verdicts_for(cfg, curve))


# --- output --------------------------------------------------------------


def csv_text(curve: CurveReport) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in curve.rows():
        buf.write(",".join("%.12e" % v for v in row) + "\n")
    return buf.getvalue()


def report_text(records: list[VerdictRecord]) -> str:
    return "".join(r.line() + "\n" for r in records)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- commands ------------------------------------------------------------


def _overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.samples is not None:
        changes["samples"] = args.samples
    if args.tol is not None:
        changes["tol"] = args.tol
    if args.tol_margin is not None:
        changes["tol_margin"] = args.tol_margin
    if changes.get("samples", MIN_SAMPLES) < MIN_SAMPLES:
        raise ConfigError(f"--samples must be at least {MIN_SAMPLES}")
    if changes.get("tol", 1.0) <= 0:
        raise ConfigError("--tol must be positive")
    return replace(cfg, **changes)


def _guarded(fn):
    def wrapper(args) -> int:
        try:
            return fn(args)
        except ConfigError as exc:
            print(f"error: invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ConvergenceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
        except (NumericalError, FloatingPointError) as exc:
            print(f"error: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    return wrapper


@_guarded
def cmd_run(args) -> int:
    return _run_config(args, _overrides(load(args.config), args))


SWEEP_COLUMNS = ("T", "energy", "rho_defect", "g_defect", "iterations", "residual")


def sweep_row(cfg: ScenarioConfig, T: float) -> tuple[float, ...]:
    """Energy, ``||rho_t* - P_t* u||_1`` and ``||P_{T-t*} g - 1||_1`` for one horizon."""
    sc = prepare(cfg, T)
    op = sc.semigroup
    if not 0 < cfg.t_star < T:
        raise ConfigError(f"sweep.t_star = {cfg.t_star} must lie inside (0, {T})")
    dec = solve_schrodinger(op, sc.u, sc.v, T, tol=cfg.tol, max_iter=cfg.max_iter)
    grid = sc.geometry.grid
    rep, _ = evaluate(interpolate(dec, 0.5 * T), sc.geometry)
    t_star = cfg.t_star
    rho = interpolate(dec, t_star).rho.values
    heat = Propagator(op, t_star).apply(sc.u.values)
    rho_defect = grid.integrate(np.abs(rho - heat))
    # P_{T-t*} g -> 1 is what makes rho_t* approach the heat flow of u
    g_defect = grid.integrate(np.abs(Propagator(op, T - t_star).apply(dec.g.values) - 1.0))
    return (T, rep.energy, rho_defect, g_defect, float(dec.iterations), dec.residual)


@_guarded
def cmd_sweep(args) -> int:
    cfg = _overrides(load(args.config), args)
    try:
        Ts = tuple(float(s) for s in args.T.split(","))
    except ValueError:
        raise ConfigError("--T expects comma-separated numbers") from None
    if not Ts or any(not T > 0 for T in Ts):
        raise ConfigError("every horizon must be positive")
    if len(Ts) == 1:
        return _run_config(args, replace(cfg, T=Ts[0]))
    sc = prepare(cfg)
    grid = sc.geometry.grid
    if not grid.periodic or sc.geometry.K < 0:
        raise ConfigError("sweep-T needs a periodic grid with K >= 0")
    if abs(grid.total_mass - 1.0) > 1e-12:
        raise ConfigError("sweep-T needs a probability reference measure (geometry.normalize_measure)")
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(Ts))) as pool:
        rows = list(pool.map(lambda T: sweep_row(cfg, T), Ts))
    buf = io.StringIO()
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join("%.12e" % v for v in row) + "\n")
    name = f"{cfg.scenario}_sweep.csv"
    write_atomic(Path(args.out_dir) / name, buf.getvalue())
    if not args.quiet:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _run_config(args, cfg: ScenarioConfig) -> int:
    outcome = execute(cfg)
    out_dir = Path(args.out_dir)
    write_atomic(out_dir / cfg.csv, csv_text(outcome.curve))
    write_atomic(out_dir / cfg.report, report_text(outcome.verdicts))
    if not args.quiet:
        for r in outcome.verdicts:
            print(r.line())
    return EXIT_FAIL if any(r.verdict == FAIL for r in outcome.verdicts) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--samples", type=int)
        p.add_argument("--tol", type=float, help="solver tolerance (L1 marginal error)")
        p.add_argument("--tol-margin", type=float, help="relative verdict tolerance")
        p.add_argument("--quiet", action="store_true")

    run = sub.add_parser("run", help="solve, build the curve and check the bound")
    common(run)
    run.set_defaults(func=cmd_run)
    sweep = sub.add_parser("sweep-T", help="long-horizon behaviour over several T")
    common(sweep)
    sweep.add_argument("--T", required=True, help="comma-separated horizons")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
