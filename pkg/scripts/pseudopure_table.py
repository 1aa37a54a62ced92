"""Checkpoint table of the labeled-pseudopure network, plus ensemble residuals.

The residual after the final gradient vanishes on the midpoint grid only
when the first gradient spreads the two-coherence by a whole number of turns.
"""
import argparse
import math

from nmrsim import protocols as pr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slices", type=int, nargs="+", default=[16, 64, 256])
    args = ap.parse_args()
    print(pr.pseudopure_checkpoints().format())
    print(f"{'area/pi':>8}{'slices':>8}{'residual':>12}")
    for area in (0.5 * math.pi, math.pi, 1.3 * math.pi, 2 * math.pi):
        for n in args.slices:
            res = pr.pseudopure_numeric(area=area, n_slices=n)
            print(f"{area / math.pi:8.2f}{n:8d}{res.residual:12.3e}")


if __name__ == "__main__":
    main()
