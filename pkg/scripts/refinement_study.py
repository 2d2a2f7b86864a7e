"""Grid and time-sample refinement for the disjoint-bump scenario.

Prints, per resolution, the verdict, the worst deficit-identity residual and
the continuity residual at T/2. Both residuals should fall with refinement.
"""

import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from ecl import cli, config
from ecl.bridge import continuity_residual

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "bumps_T1.cfg"
LEVELS = ((257, 31), (513, 63), (1025, 127))


def main() -> None:
    base = config.load(CONFIG)
    print(f"{'points':>7} {'samples':>7} {'verdict':>8} {'identity':>10} {'continuity':>11} {'seconds':>8}")
    for points, samples in LEVELS:
        cfg = replace(base, geometry=replace(base.geometry, points=(points,)), samples=samples)
        start = time.perf_counter()
        out = cli.execute(cfg)
        identity = float(np.max(out.curve.deficit_identity_residual))
        # halve the time step together with the spacing
        cont = continuity_residual(out.decomposition, 0.5 * cfg.T, cfg.T / (8 * (samples + 1)))
        seconds = time.perf_counter() - start
        print(f"{points:>7} {samples:>7} {out.verdicts[0].verdict:>8} {identity:>10.2e} {cont:>11.2e} "
              f"{seconds:>8.1f}")


if __name__ == "__main__":
    main()
