"""Energy and heat-flow defect of the interpolation as the horizon grows.

On a flat circle with a probability reference measure the interpolation at a
fixed time approaches the heat flow of the source and the energy vanishes.
"""

from pathlib import Path

from ecl import cli, config

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "circle_flat_sweep.cfg"
HORIZONS = (1.0, 2.0, 4.0, 8.0, 16.0)


def main() -> None:
    cfg = config.load(CONFIG)
    print(f"{'T':>6} {'energy':>11} {'rho_defect':>11} {'g_defect':>11} {'iterations':>10}")
    for T in HORIZONS:
        row = cli.sweep_row(cfg, T)
        print(f"{T:>6g} {row[1]:>11.3e} {row[2]:>11.3e} {row[3]:>11.3e} {int(row[4]):>10d}")


if __name__ == "__main__":
    main()
