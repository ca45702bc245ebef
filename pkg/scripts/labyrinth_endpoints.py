"""Labyrinth walks: NS estimate against brute force, and the endpoint scatter.

The bundled 12x12 maze is run through the CLI and its dead samples are
drawn as walk endpoints coloured by rank. A small open grid, where brute
force is cheap, gives the numerical comparison.

    python scripts/labyrinth_endpoints.py --runs 25 --J 25
"""
import argparse
import math
from pathlib import Path

import numpy as np

from nsquad.cli import main as nsquad
from nsquad.engine import EngineConfig, run
from nsquad.estimators import rare_event_log_prob
from nsquad.problems import labyrinth_problem, monte_carlo_oracle


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=25)
    ap.add_argument("--runs", type=int, default=25)
    ap.add_argument("--size", type=int, default=6, help="open grid for the brute-force comparison")
    ap.add_argument("--K", type=int, default=40, help="walk length on the open grid")
    ap.add_argument("--oracle", type=int, default=1_000_000)
    ap.add_argument("--out", default="out/labyrinth")
    args = ap.parse_args(argv)

    small = labyrinth_problem(size=args.size, K=args.K)
    est = monte_carlo_oracle(small, args.oracle, seed=1)
    lp = np.array([rare_event_log_prob(run(small, EngineConfig(J=args.J, N=1_000_000, seed=s,
                                                               termination_epsilon=0.01)),
                                       small.event_threshold, "indicator_sum")
                   for s in range(args.runs)])
    print(f"{args.size}x{args.size} K={args.K}: oracle log P {est.log_p:.4f} +- {est.log_se:.4f}; "
          f"NS mean {lp.mean():.4f} +- {lp.std(ddof=1) / math.sqrt(len(lp)):.4f}")

    d = Path(args.out) / "maze12"
    code = nsquad(["run", "--problem", "labyrinth", "--J", str(args.J), "--runs", "1", "--out", str(d)])
    if code:
        return code
    runs = sorted(str(p) for p in (d / "runs").glob("*.nsrun"))
    return nsquad(["plot", "--kind", "paths", *runs, "--name", "endpoints", "--out", str(d)])


if __name__ == "__main__":
    raise SystemExit(main())
