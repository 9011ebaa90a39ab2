"""Diophantine statistics over rotation angles for the |x|^4 + |y|^4 body.

Scans a uniform angle grid, reports the identity and golden angles, and
estimates how fast the measure of angles with M_hat above a level decays.
"""
import argparse
import math
import os

import numpy as np

from latticemsd.bodies import Superellipse2D, flat_points
from latticemsd.discrepancy import fit_loglog
from latticemsd.rotations import GOLDEN_ANGLE, RATIONAL_ANGLE, diophantine_sup, reports_to_csv, rotation_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/rotations")
    ap.add_argument("--angles", type=int, default=2000)
    ap.add_argument("--K", type=int, default=10**4)
    ap.add_argument("--eps", type=float, default=0.1)
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    body = Superellipse2D(4)
    fps = flat_points(body)

    reps = rotation_scan(body, [0.0, GOLDEN_ANGLE, RATIONAL_ANGLE], 256, 1000, a.eps)
    reports_to_csv(reps, os.path.join(a.out, "named_angles.csv"), "superellipse:m=4")
    for r in reps:
        print(f"theta={r.theta:.6f} cond={r.cond_max:.3g} G_scaled={r.G_scaled:.4f}")

    rng = np.random.default_rng(0)
    thetas = rng.uniform(0, math.pi / 2, a.angles)
    M = np.array([max(diophantine_sup(th, f, a.eps, a.K).M_hat for f in fps) for th in thetas])
    np.savetxt(os.path.join(a.out, "M_hat.csv"), np.column_stack([thetas, M]), delimiter=",",
               header="theta,M_hat", comments="")
    finite = np.sort(M[np.isfinite(M)])
    levels = np.quantile(finite, [0.5, 0.7, 0.8, 0.9, 0.95, 0.98])
    frac = np.array([(M > L).mean() for L in levels])
    fit = fit_loglog(levels, frac)
    print(f"tail measure slope {fit.slope:.3f} over levels {np.round(levels, 2).tolist()}")


if __name__ == "__main__":
    main()
