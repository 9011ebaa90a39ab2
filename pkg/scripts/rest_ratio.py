"""Sup of |E(t)| / t^{2/3} for the polar of the |x|^4 + |y|^4 body, per octave."""
import argparse

from latticemsd.bodies import Superellipse2D, polar
from latticemsd.discrepancy import rest_ratio_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--top", type=int, default=9, help="largest octave exponent")
    a = ap.parse_args()
    checks = [2.0**k for k in range(1, a.top + 1)]
    prof = rest_ratio_profile(polar(Superellipse2D(4)), 1, checks[-1], 2 / 3, checks)
    for c, v in zip(checks, prof):
        print(f"t <= {c:6.0f}: sup {v:.4f}")


if __name__ == "__main__":
    main()
