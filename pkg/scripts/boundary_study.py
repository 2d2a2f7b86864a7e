"""Effect of the box half-width on the Gaussian heat-flow equality case.

For heat flow from N(0, 1) the second derivative of the entropy power is
zero. On a truncated box the reflecting faces perturb the flow once the
Gaussian tail reaches them; this prints max |N''| / N(0) and the relative
error of N against 2 pi e (1 + 2t) for several half-widths at fixed spacing.
"""

import math

import numpy as np

from ecl import grid
from ecl.bridge import solve_schrodinger
from ecl.calculus import GeometryConfig
from ecl.semigroup import Propagator, build_semigroup
from ecl.verdict import build_curve

SPACING = 1.0 / 32
HALF_WIDTHS = (6.0, 8.0, 10.0, 12.0)


def main() -> None:
    print(f"{'L':>5} {'points':>7} {'tail mass':>10} {'max|d2N|/N(0)':>14} {'N rel err':>10}")
    for L in HALF_WIDTHS:
        points = int(round(2 * L / SPACING)) + 1
        geo = GeometryConfig(grid.box(L, points), 1)
        op = build_semigroup(geo)
        x = geo.grid.axes[0]
        u = grid.normalize(geo.grid.field(np.exp(-x**2 / 2)))
        v = grid.normalize(geo.grid.field(Propagator(op, 1.0).apply(u.values)))
        curve = build_curve(solve_schrodinger(op, u, v, 1.0), geo)
        N0 = 2 * math.pi * math.e
        exact = N0 * (1 + 2 * curve.t)
        d2N = float(np.max(np.abs(curve.d2N_analytic))) / N0
        rel = float(np.max(np.abs(curve.column("N") / exact - 1)))
        tail = math.erfc(L / math.sqrt(6.0))
        print(f"{L:>5g} {points:>7d} {tail:>10.1e} {d2N:>14.2e} {rel:>10.1e}")


if __name__ == "__main__":
    main()
