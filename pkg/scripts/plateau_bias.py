"""Bias of the evidence on the plateau fixtures, with and without the live top-up.

Prints one row per (Delta, location, top-up): mean Z over the runs, the
exact integral, the bias, its standard error and the first-order bound
|exp(-Delta) - (1 - Delta)|.

    python scripts/plateau_bias.py --runs 200 --J 100
"""
import argparse
import math

import numpy as np

from nsquad.engine import EngineConfig, run
from nsquad.estimators import log_evidence
from nsquad.problems import plateau_fixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=100)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    args = ap.parse_args(argv)

    print("delta,location,topup,mean_z,exact,bias,se,bound")
    for delta in args.deltas:
        for loc in ("min_plateau", "max_plateau"):
            prob = plateau_fixture(delta, loc)
            runs = [run(prob, EngineConfig(J=args.J, N=1_000_000, seed=s,
                                           termination_epsilon=args.epsilon))
                    for s in range(args.runs)]
            for topup in (True, False):
                z = np.exp([log_evidence(r, prob.integrand(), topup=topup) for r in runs])
                exact = prob.exact["g"]
                se = z.std(ddof=1) / math.sqrt(len(z))
                bound = abs(math.exp(-delta) - (1 - delta))
                print(f"{delta},{loc},{topup},{z.mean():.5f},{exact:.5f},"
                      f"{z.mean() - exact:+.5f},{se:.5f},{bound:.5f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
