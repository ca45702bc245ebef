"""Estimated survival functions of the Gaussian and Cauchy tail problems.

Each run's dead levels give a step estimate of mu(g > lambda); the plot
overlays every run on the closed-form curve, on a log axis.

    python scripts/survival_figures.py --runs 50 --J 50
"""
import argparse
from pathlib import Path

from nsquad.cli import main as nsquad

RANGES = {"gaussian": 5.0, "cauchy": 100.0}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=50)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/survival")
    args = ap.parse_args(argv)

    for name, lam_max in RANGES.items():
        d = Path(args.out) / name
        code = nsquad(["run", "--problem", name, "--J", str(args.J), "--runs", str(args.runs),
                       "--seed", str(args.seed), "--out", str(d)])
        if code:
            return code
        runs = sorted(str(p) for p in (d / "runs").glob("*.nsrun"))
        code = nsquad(["plot", "--kind", "survival", *runs, "--lam-max", str(lam_max),
                       "--out", str(d)])
        if code:
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
