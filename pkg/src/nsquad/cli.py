"""Command line: seeded run batches, replayed estimates, plots, oracles, manifest checks.

Exit status: 0 success, 1 usage error, 2 runtime failure, 3 verification mismatch.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import estimators as est
from . import svgplot
from .core import ChecksumError, ContractionScheme, NSRun, ParameterError, SamplerConfig, read_run, write_run
from .engine import EngineConfig, run as run_engine
from .problems import UnknownProblem, get_problem, monte_carlo_oracle, problem_for_run

log = logging.getLogger("nsquad.cli")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3
OUTPUT_ENV = "NSQUAD_OUTPUT_DIR"
PLOT_KINDS = ("trace", "boxplot-table", "survival", "paths")

DEFAULTS = {
    "problem": {"name": None},
    "engine": {"J": 50, "N": 10_000, "scheme": "exponential", "seed": 0,
               "termination_epsilon": 0.01, "level_equality_tolerance": 0.0,
               "rejection_budget": 1_000_000},
    "sampler": None,
    "runs": 1,
    "estimate": {"kappa": None, "moments": [], "statistic": None, "topup_evidence": False},
}

# flags that set problem parameters, mapped to the factory argument they feed
PROBLEM_FLAGS = {"a": "a", "delta": "delta", "location": "location", "kappa_uniform": "kappa",
                 "sigma": "sigma", "dt": "dt", "K": "K", "size": "size", "map": "map"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _atomic_write(path: Path, data: str | bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data)
    tmp.replace(path)
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(_canonical(cfg).encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUTPUT_ENV) or "nsquad-out")


def _deep_update(base: dict, new: dict) -> dict:
    for k, v in new.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def _set_dotted(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise UsageError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        if node.get(p) is None:
            node[p] = {}
        node = node[p]
        if not isinstance(node, dict):
            raise UsageError(f"--set {key}: {p!r} is not a section")
    node[parts[-1]] = yaml.safe_load(raw)


# ---------------------------------------------------------------------------
# configuration


def build_config(args) -> dict:
    """Defaults, then the config file, then flags, then --set overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a mapping")
        if isinstance(loaded.get("problem"), str):
            loaded["problem"] = {"name": loaded["problem"]}
        _deep_update(cfg, loaded)
    if args.problem:
        cfg["problem"]["name"] = args.problem
    for flag, param in PROBLEM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg["problem"][param] = v
    for flag, key in (("J", "J"), ("N", "N"), ("seed", "seed"), ("epsilon", "termination_epsilon"),
                      ("scheme", "scheme"), ("tolerance", "level_equality_tolerance")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg["engine"][key] = v
    if args.runs is not None:
        cfg["runs"] = args.runs
    if args.sampler:
        cfg["sampler"] = dict(cfg["sampler"] or {}, kind=args.sampler)
    if args.kappa:
        cfg["estimate"]["kappa"] = list(args.kappa)
    for assignment in args.set or ():
        _set_dotted(cfg, assignment)
    if not cfg["problem"].get("name"):
        raise UsageError("no problem given (use --problem or a config file)")
    if int(cfg["runs"]) < 1:
        raise UsageError("--runs must be at least 1")
    return cfg


def _problem_from(cfg: dict):
    params = {k: v for k, v in cfg["problem"].items() if k != "name"}
    return get_problem(cfg["problem"]["name"], **params)


def _engine_from(cfg: dict, seed: int) -> EngineConfig:
    e = dict(cfg["engine"], seed=seed)
    sampler = SamplerConfig(**cfg["sampler"]) if cfg.get("sampler") else None
    return EngineConfig(J=int(e["J"]), N=int(e["N"]), scheme=ContractionScheme(e["scheme"]),
                        sampler=sampler, seed=int(seed),
                        termination_epsilon=float(e["termination_epsilon"]),
                        level_equality_tolerance=float(e["level_equality_tolerance"]),
                        rejection_budget=int(e.get("rejection_budget", 1_000_000)))


def _kappas(cfg: dict, problem) -> list[float]:
    k = cfg["estimate"].get("kappa")
    if k is None:
        return [float(problem.event_threshold)]
    return [float(x) for x in (k if isinstance(k, list) else [k])]


# ---------------------------------------------------------------------------
# run


SUMMARY_HEADER = ["seed", "J", "n_dead", "termination", "valid", "kappa",
                  "log_p_indicator_sum", "log_p_remaining_mass", "log_z"]


def _run_one(cfg: dict, seed: int, out: str) -> dict:
    """One seeded run plus its report; executed in worker processes too."""
    problem = _problem_from(cfg)
    t0 = time.perf_counter()
    r = run_engine(problem, _engine_from(cfg, seed))
    wall = time.perf_counter() - t0
    stem = f"{problem.name}_s{seed}"
    out_dir = Path(out)
    run_path = write_run(r, _mkparent(out_dir / "runs" / f"{stem}.nsrun"))
    e = cfg["estimate"]
    report = est.estimate_report(r, problem, kappas=_kappas(cfg, problem),
                                 moment_orders=e.get("moments") or (),
                                 statistic=e.get("statistic"),
                                 topup_evidence=bool(e.get("topup_evidence")))
    paths = report.write(_mkparent(out_dir / "reports" / stem))
    rows = _summary_rows(r, report, problem)
    return {"seed": seed, "wall": wall, "rows": rows, "valid": r.valid,
            "termination": r.termination_reason.value,
            "artifacts": [str(p.relative_to(out_dir)) for p in [run_path, *paths]]}


def _mkparent(p: Path) -> Path:
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _summary_rows(r: NSRun, report: est.EstimateReport, problem) -> list[list]:
    lz = report.log_z.get(problem.primary_integrand, {}).get("log_z", float("nan"))
    by_kappa: dict[float, dict] = {}
    for e in report.rare_events:
        by_kappa.setdefault(e["kappa"], {})[e["method"]] = e["log_p"]
    return [[r.seed, r.J, len(r.dead), r.termination_reason.value, r.valid, k,
             v.get("indicator_sum"), v.get("remaining_mass"), lz] for k, v in by_kappa.items()]


def _batch_stats(rows: list[list]) -> dict:
    stats = {}
    for kappa in sorted({row[5] for row in rows}):
        for col, name in ((6, "indicator_sum"), (7, "remaining_mass")):
            vals = np.array([row[col] for row in rows if row[5] == kappa and row[4]], dtype=float)
            fin = vals[np.isfinite(vals)]
            stats[f"kappa={kappa!r}/{name}"] = {
                "n": int(vals.size), "n_finite": int(fin.size),
                "mean_log_p": float(fin.mean()) if fin.size else None,
                "sd_log_p": float(fin.std(ddof=1)) if fin.size > 1 else None}
    lz = np.array([row[8] for row in rows if row[4]], dtype=float)
    lz = lz[np.isfinite(lz)]
    if lz.size:
        stats["evidence"] = {"mean_log_z": float(lz.mean()), "mean_z": float(np.exp(lz).mean()),
                             "sd_z": float(np.exp(lz).std(ddof=1)) if lz.size > 1 else None}
    return stats


def execute_batch(cfg: dict, out: Path, workers: int = 1) -> dict:
    """Run every seed of a config into ``out`` and write the manifest."""
    out.mkdir(parents=True, exist_ok=True)
    problem = _problem_from(cfg)  # fail early on bad parameters
    _engine_from(cfg, 0)
    seed0 = int(cfg["engine"]["seed"])
    seeds = [seed0 + k for k in range(int(cfg["runs"]))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [cfg] * len(seeds), seeds, [str(out)] * len(seeds)))
    else:
        results = [_run_one(cfg, s, str(out)) for s in seeds]

    rows = [row for res in results for row in res["rows"]]
    summary_csv = _atomic_write(out / "summary.csv", _csv_text(SUMMARY_HEADER, rows))
    summary = {"problem": problem.name, "params": dict(problem.params), "J": cfg["engine"]["J"],
               "runs": len(seeds), "stats": _batch_stats(rows), "exact": dict(problem.exact)}
    summary_json = _atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True))
    artifacts = [a for res in results for a in res["artifacts"]]
    artifacts += [str(summary_csv.relative_to(out)), str(summary_json.relative_to(out))]
    manifest = {
        "tool": "nsquad", "version": __version__, "command": "run",
        "config": cfg, "config_digest": config_digest(cfg), "seeds": seeds,
        "artifacts": {a: sha256_file(out / a) for a in artifacts},
        "wall_clock_seconds": {str(res["seed"]): round(res["wall"], 6) for res in results},
        "aborted": [res["seed"] for res in results if not res["valid"]],
        "terminations": {str(res["seed"]): res["termination"] for res in results},
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    return {"summary": summary, "manifest": manifest}


def cmd_run(args) -> int:
    cfg = build_config(args)
    out = _out_dir(args.out)
    result = execute_batch(cfg, out, workers=args.workers)
    for key, s in result["summary"]["stats"].items():
        print(f"{key}: " + ", ".join(f"{k}={v}" for k, v in s.items()))
    if result["manifest"]["aborted"]:
        print(f"aborted runs (seeds): {result['manifest']['aborted']}", file=sys.stderr)
    print(f"wrote {out / 'manifest.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def _load_runs(paths) -> list[tuple[Path, NSRun]]:
    if not paths:
        raise UsageError("no run files given")
    out = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise UsageError(f"no such run file: {p}")
        out.append((p, read_run(p)))
    return out


def cmd_estimate(args) -> int:
    runs = _load_runs(args.runs)
    out = _out_dir(args.out)
    rows = []
    for path, r in runs:
        problem = problem_for_run(r)
        kappas = [float(k) for k in args.kappa] if args.kappa else [float(problem.event_threshold)]
        integrands = args.integrand or None
        for name in integrands or ():
            if name not in problem.integrands:
                raise UsageError(f"problem {problem.name!r} has no integrand {name!r}; "
                                 f"available: {sorted(problem.integrands)}")
        report = est.estimate_report(r, problem, kappas=kappas, integrands=integrands,
                                     moment_orders=args.moments or (), statistic=args.statistic,
                                     topup_evidence=args.topup)
        report.write(out / path.name.removesuffix(".nsrun"))
        digest = hashlib.sha256(report.to_json().encode()).hexdigest()
        print(f"{path.name}: report sha256 {digest}")
        for e in report.rare_events:
            rows.append([path.name, e["kappa"], e["method"], e["log_p"]])
        for m in report.moments:
            rows.append([path.name, f"k={m['k']}", f"moment:{m['statistic']}", m["value"]])
    _atomic_write(out / "estimates.csv", _csv_text(["run", "kappa", "method", "value"], rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot


def _evidence_trace(r: NSRun, problem) -> np.ndarray:
    ig = problem.integrand()
    vals = ig(r.levels)
    with np.errstate(divide="ignore"):
        terms = r.log_weights() + np.log(np.where(vals > 0, vals, 0.0))
    return np.logaddexp.accumulate(terms) if len(terms) else np.empty(0)


def plot_trace(runs, out: Path, name: str, reference: float | None) -> list[Path]:
    series, rows = [], []
    for k, (path, r) in enumerate(runs):
        problem = problem_for_run(r)
        tr = _evidence_trace(r, problem)
        it = np.arange(1, len(tr) + 1)
        keep = np.isfinite(tr)
        series.append(svgplot.Series(f"seed {r.seed}", it[keep], tr[keep], color="#555555",
                                     width=0.8, opacity=0.6, in_legend=k == 0))
        rows += [[r.seed, int(i), float(v)] for i, v in zip(it, tr)]
        if reference is None and problem.primary_integrand in problem.exact:
            reference = math.log(problem.exact[problem.primary_integrand])
    if reference is not None:
        n = max(len(s.x) for s in series) if series else 1
        series.append(svgplot.Series("true value", [1, n], [reference, reference], color="#1f77b4", width=2))
    svg = svgplot.line_chart(series, title="accumulated log Z", xlabel="iteration",
                             ylabel="log Z", version=__version__)
    return [_atomic_write(out / f"{name}.csv", _csv_text(["seed", "iteration", "log_z"], rows)),
            _atomic_write(out / f"{name}.svg", svg)]


def _read_summaries(paths) -> list[tuple[str, list[float]]]:
    groups: dict[str, list[float]] = {}
    for p in paths:
        p = Path(p)
        if p.suffix != ".csv":
            raise UsageError(f"boxplot-table needs summary CSV files, got {p.name}")
        with p.open() as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "log_p_indicator_sum" not in reader.fieldnames:
                raise UsageError(f"{p} is not a run summary")
            for row in reader:
                groups.setdefault(f"J={row['J']}", []).append(float(row["log_p_indicator_sum"]))
    return sorted(groups.items(), key=lambda kv: int(kv[0][2:]))


def plot_boxplot(paths, out: Path, name: str, reference: float | None) -> list[Path]:
    groups = _read_summaries(paths)
    header = ["group", "n", "min", "whisker_lo", "q1", "median", "q3", "whisker_hi", "max", "mean", "sd"]
    rows = []
    for label, vals in groups:
        s = svgplot.box_stats(vals)
        rows.append([label] + [s.get(h) for h in header[1:]])
    svg = svgplot.boxplot_chart(groups, reference=reference, title="rare-event log-probability by J",
                                ylabel="log P", version=__version__)
    return [_atomic_write(out / f"{name}.csv", _csv_text(header, rows)),
            _atomic_write(out / f"{name}.svg", svg)]


def plot_survival(runs, out: Path, name: str, lam_max: float | None) -> list[Path]:
    problem = problem_for_run(runs[0][1])
    hi = lam_max if lam_max is not None else max(float(r.levels.max()) for _, r in runs if len(r.dead))
    lo = min(float(r.levels.min()) for _, r in runs if len(r.dead))
    grid = np.linspace(lo, hi, 201)
    curves = np.array([[est.survival_curve(r).log_survival(float(x)) for x in grid] for _, r in runs])
    with np.errstate(invalid="ignore"):
        mean_log = curves.mean(axis=0)
    series = [svgplot.Series("estimate" if k == 0 else "", grid, np.exp(c), color="#d62728",
                             width=0.8, opacity=0.5, in_legend=k == 0) for k, c in enumerate(curves)]
    header = ["level", "mean_log_survival"] + [f"log_survival_s{r.seed}" for _, r in runs]
    oracle = None
    if problem.log_survival is not None:
        oracle = np.array([problem.log_survival(float(x)) for x in grid])
        series.append(svgplot.Series("true", grid, np.exp(oracle), color="#1f77b4", width=2))
        header.insert(2, "true_log_survival")
    rows = []
    for j, x in enumerate(grid):
        row = [float(x), float(mean_log[j])]
        if oracle is not None:
            row.append(float(oracle[j]))
        rows.append(row + [float(c[j]) for c in curves])
    svg = svgplot.line_chart(series, title=f"survival function, {problem.name}", xlabel="level",
                             ylabel="P(g > level)", logy=True, version=__version__)
    return [_atomic_write(out / f"{name}.csv", _csv_text(header, rows)),
            _atomic_write(out / f"{name}.svg", svg)]


def plot_paths(runs, out: Path, name: str, max_items: int = 200) -> list[Path]:
    path0, r0 = runs[0]
    problem = problem_for_run(r0)
    if problem.trajectory is None:
        raise UsageError(f"problem {problem.name!r} has no trajectory view")
    items, rows = [], []
    for _, r in runs:
        n = len(r.dead)
        pick = np.unique(np.linspace(0, n - 1, min(n, max_items)).round().astype(int)) if n else []
        for i in pick:
            d = r.dead[i]
            tr = np.asarray(problem.trajectory(d.position), dtype=float)
            items.append(tr)
            rows += [[r.seed, d.iteration, j, float(v)] for j, v in enumerate(tr)]
    if not items:
        raise UsageError("runs contain no dead samples")
    scatter = len(items[0]) == 2 and problem.dimension == "walk"
    svg = svgplot.ranked_chart(items, scatter=scatter, title=f"dead samples by rank, {problem.name}",
                               xlabel="column" if scatter else "time step",
                               ylabel="row" if scatter else "state", version=__version__)
    return [_atomic_write(out / f"{name}.csv", _csv_text(["seed", "iteration", "index", "value"], rows)),
            _atomic_write(out / f"{name}.svg", svg)]


def cmd_plot(args) -> int:
    if args.kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {args.kind!r}; choose from {PLOT_KINDS}")
    if not args.inputs:
        raise UsageError("no inputs to plot")
    out = _out_dir(args.out)
    name = args.name or args.kind.replace("-", "_")
    if args.kind == "boxplot-table":
        written = plot_boxplot(args.inputs, out, name, args.reference)
    else:
        if any(not str(p).endswith(".nsrun") for p in args.inputs):
            raise UsageError(f"plot kind {args.kind!r} needs run files (.nsrun)")
        runs = _load_runs(args.inputs)
        if len({(r.problem_name, _canonical(r.problem_params)) for _, r in runs}) > 1:
            raise UsageError("runs come from different problems")
        if args.kind == "trace":
            written = plot_trace(runs, out, name, args.reference)
        elif args.kind == "survival":
            written = plot_survival(runs, out, name, args.lam_max)
        else:
            written = plot_paths(runs, out, name)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    cfg = build_config(args)
    problem = _problem_from(cfg)
    seed = int(cfg["engine"]["seed"])
    t0 = time.perf_counter()
    o = monte_carlo_oracle(problem, args.samples, seed, bootstrap=args.bootstrap)
    doc = {"oracle": o.to_dict(), "config_digest": config_digest(cfg["problem"]),
           "kappa": problem.event_threshold, "version": __version__}
    out = _out_dir(args.out)
    path = _atomic_write(out / f"oracle_{problem.name}_{config_digest(cfg['problem'])[:12]}_n{args.samples}_s{seed}.json",
                         json.dumps(doc, indent=2, sort_keys=True))
    flag = " (no hits: upper bound only)" if o.upper_bound_only else ""
    print(f"{problem.name}: p={o.p!r} CI=[{o.ci_low!r}, {o.ci_high!r}] hits={o.hits}/{o.n}{flag} "
          f"in {time.perf_counter() - t0:.1f}s")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _digest_mismatches(root: Path, artifacts: dict) -> list[str]:
    bad = []
    for rel, digest in artifacts.items():
        p = root / rel
        if not p.exists():
            bad.append(f"missing: {rel}")
        elif sha256_file(p) != digest:
            bad.append(f"changed: {rel}")
    return bad


def cmd_verify(args) -> int:
    mpath = Path(args.manifest)
    try:
        manifest = json.loads(mpath.read_text())
        cfg, artifacts = manifest["config"], manifest["artifacts"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {mpath}: {exc}") from None
    problems = []
    if config_digest(cfg) != manifest.get("config_digest"):
        problems.append("config digest does not match the stored config")
    problems += _digest_mismatches(mpath.parent, artifacts)
    if not args.digests_only:
        with tempfile.TemporaryDirectory() as tmp:
            execute_batch(cfg, Path(tmp), workers=args.workers)
            rerun = json.loads((Path(tmp) / "manifest.json").read_text())["artifacts"]
        for rel, digest in artifacts.items():
            if rerun.get(rel) != digest:
                problems.append(f"rerun differs: {rel}")
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_MISMATCH
    print(f"verified {len(artifacts)} artifacts" + ("" if args.digests_only else " (re-executed)"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_batch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="registered problem name")
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry, e.g. engine.J=100 or problem.sigma=0.7")
    p.add_argument("--a", type=float, help="tail threshold (gaussian, cauchy)")
    p.add_argument("--delta", type=float, help="plateau mass (plateau)")
    p.add_argument("--location", choices=["min_plateau", "max_plateau"], help="plateau position")
    p.add_argument("--kappa-uniform", dest="kappa_uniform", type=float, help="event level (uniform)")
    p.add_argument("--sigma", type=float, help="noise scale (double_well)")
    p.add_argument("--dt", type=float, help="time step (double_well)")
    p.add_argument("--K", type=int, help="walk length (labyrinth)")
    p.add_argument("--size", type=int, help="open grid size instead of a map (labyrinth)")
    p.add_argument("--map", help="map name or path (labyrinth)")
    p.add_argument("--J", type=int, help="live particles")
    p.add_argument("--N", type=int, help="dead-sample budget")
    p.add_argument("--runs", type=int, help="independent runs (seeds seed..seed+runs-1)")
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--scheme", choices=[s.value for s in ContractionScheme])
    p.add_argument("--sampler", choices=["rwm", "pcn", "slice", "rejection"])
    p.add_argument("--epsilon", type=float, help="early-stop tolerance, 0 disables (default 0.01)")
    p.add_argument("--tolerance", type=float, help="level equality tolerance for ties")
    p.add_argument("--kappa", type=float, nargs="+", help="rare-event thresholds to report")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./nsquad-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsquad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nsquad {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v progress, -vv per-batch engine events")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a batch of seeded nested-sampling runs")
    _add_batch_flags(p)
    p.add_argument("--workers", type=int, default=1, help="parallel processes across seeds")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("estimate", help="replay estimators on stored runs")
    p.add_argument("runs", nargs="*", help=".nsrun files")
    p.add_argument("--kappa", type=float, nargs="+")
    p.add_argument("--integrand", nargs="+", help="integrand names (default: all)")
    p.add_argument("--moments", type=int, nargs="+", help="moment orders")
    p.add_argument("--statistic", help="scalar statistic for moments and the CDF")
    p.add_argument("--topup", action="store_true", help="add the live top-up to evidence values")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("plot", help="SVG plus CSV for runs or summaries")
    p.add_argument("--kind", required=True, help=" | ".join(PLOT_KINDS))
    p.add_argument("inputs", nargs="*")
    p.add_argument("--reference", type=float, help="horizontal reference value")
    p.add_argument("--lam-max", dest="lam_max", type=float, help="survival plot upper level")
    p.add_argument("--name", help="output file stem")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("oracle", help="brute-force Monte Carlo oracle")
    _add_batch_flags(p)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="re-check a manifest's artifacts")
    p.add_argument("manifest")
    p.add_argument("--digests-only", action="store_true", help="check files on disk without re-running")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to 1
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, UnknownProblem) as exc:
        print(f"nsquad: error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"nsquad: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChecksumError as exc:
        print(f"nsquad: corrupt run file: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - report any runtime failure with status 2
        log.debug("failure", exc_info=True)
        print(f"nsquad: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
