"""Cross-run spread of rare-event estimates as J grows, with evidence traces.

Runs one batch per J through the CLI, then draws a boxplot table of
log P (with the exact or brute-force reference line) and a trace plot of
the accumulated log Z for the largest J.

    python scripts/rare_event_boxplots.py --problem gaussian --J 5 15 50 --runs 200
    python scripts/rare_event_boxplots.py --problem double_well --J 10 100 --runs 25 --oracle 1000000
"""
import argparse
import json
import math
from pathlib import Path

from nsquad.cli import main as nsquad
from nsquad.problems import get_problem, monte_carlo_oracle


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="gaussian")
    ap.add_argument("--J", type=int, nargs="+", default=[5, 15, 50])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--oracle", type=int, default=0,
                    help="brute-force sample count for the reference line when no exact value exists")
    ap.add_argument("--out", default="out/rare_events")
    args = ap.parse_args(argv)

    out = Path(args.out) / args.problem
    summaries = []
    for J in args.J:
        d = out / f"J{J}"
        code = nsquad(["run", "--problem", args.problem, "--J", str(J), "--runs", str(args.runs),
                       "--seed", str(args.seed + 100_000 * J), "--out", str(d)])
        if code:
            return code
        summaries.append(str(d / "summary.csv"))

    problem = get_problem(args.problem)
    ref = problem.exact.get("indicator")
    reference = math.log(ref) if ref else None
    if reference is None and args.oracle:
        est = monte_carlo_oracle(problem, args.oracle, seed=args.seed)
        print(json.dumps(est.to_dict(), indent=2))
        reference = est.log_p
    plot = ["plot", "--out", str(out)]
    if reference is not None:
        plot += ["--reference", repr(reference)]
    nsquad(plot + ["--kind", "boxplot-table", *summaries])
    runs = sorted((out / f"J{max(args.J)}" / "runs").glob("*.nsrun"))[:20]
    return nsquad(plot + ["--kind", "trace", *map(str, runs)])


if __name__ == "__main__":
    raise SystemExit(main())
