"""Run every shipped config and print its verdict lines.

Usage: python scripts/run_scenarios.py [--out-dir results]
"""

import argparse
import sys
from pathlib import Path

from ecl import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()
    worst = 0
    for path in sorted(CONFIGS.glob("*.cfg")):
        code = cli.main(["run", str(path), "--out-dir", args.out_dir])
        if code:
            print(f"{path.stem}: exit {code}", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
