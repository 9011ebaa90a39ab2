"""Window mean-square discrepancy sweeps for the unit ball in d = 2, 3, 4.

Usage: python scripts/sweep.py [--out DIR] [--dims 2 3 4]
"""
import argparse
import os

from latticemsd.bodies import Ball
from latticemsd.discrepancy import normalized_stat, sweep_and_fit

GRIDS = {
    2: [2.0**k for k in range(4, 12)],
    3: [2.0**k for k in range(3, 9)],
    4: [2.0, 4.0, 8.0, 16.0, 32.0],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/sweeps")
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4])
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    for d in a.dims:
        tab = sweep_and_fit(Ball(d), GRIDS[d], "full")
        tab.to_csv(os.path.join(a.out, f"ball{d}.csv"))
        tab.to_json(os.path.join(a.out, f"ball{d}.json"))
        line = f"d={d} slope={tab.fit.slope:.4f} normalized_stat={normalized_stat(tab):.4f}"
        if tab.fit_deflated is not None:
            line += f" deflated_slope={tab.fit_deflated.slope:.4f}"
        print(line)


if __name__ == "__main__":
    main()
