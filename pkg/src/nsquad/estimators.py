"""Quadrature over a stored run.

Everything here is a pure function of an :class:`~nsquad.core.NSRun` and an
integrand that is a non-decreasing function of the run's surrogate level, so
one set of dead samples can be replayed against many integrands, thresholds
and statistics without sampling again.

Weight ``xi_i`` of the i-th dead sample pairs with the integrand at that
sample's own level (``endpoint="right"``). ``endpoint="left"`` pairs it with
the previous level instead, a lower Riemann-Stieltjes sum, kept for
sensitivity checks. With ``topup=True`` the final live ensemble stands in for
the remaining prior mass, each live point carrying ``exp(remaining) / J``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (CompatibilityError, ContractionScheme, Integrand, NSRun, Problem,
                   contraction_log_weights, remaining_log_mass)
from .numerics import NEG_INF, log_diff_exp, logsumexp

ENDPOINTS = ("right", "left")
RARE_EVENT_METHODS = ("indicator_sum", "remaining_mass")


class UndefinedMoment(ArithmeticError):
    """The normalizing integral is zero, so normalized quantities do not exist."""


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    """Dead (and optionally live) samples with their quadrature weights.

    ``log_xi`` is the prior-mass weight of each entry and ``values`` the
    integrand at its level; ``log_z`` is log sum xi * value.
    """

    positions: list
    levels: np.ndarray
    log_xi: np.ndarray
    values: np.ndarray
    log_z: float
    integrand: str
    live_from: int  # index of the first live (top-up) entry; len() if none

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def log_weights(self) -> np.ndarray:
        """Normalized log weights log(xi * L) - log Z; -inf where L = 0."""
        if self.log_z == NEG_INF:
            raise UndefinedMoment("integrand has no mass on the samples; weights undefined")
        with np.errstate(divide="ignore"):
            return self.log_xi + np.log(self.values) - self.log_z

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _integrand_values(integrand: Integrand, levels: np.ndarray) -> np.ndarray:
    vals = integrand(levels) if len(levels) else np.empty(0)
    if np.any(np.isnan(vals)):
        raise ValueError(f"integrand {integrand.name!r} returned NaN")
    return vals


def _node_values(run: NSRun, integrand: Integrand, endpoint: str) -> np.ndarray:
    """Integrand value paired with each dead weight."""
    levels = run.levels
    vals = _integrand_values(integrand, levels)
    if endpoint == "right":
        return vals
    if endpoint == "left":
        # the shell below the first dead level has no known lower level: credit it nothing
        out = np.zeros_like(vals)
        out[1:] = vals[:-1]
        return out
    raise ValueError(f"endpoint must be one of {ENDPOINTS}, got {endpoint!r}")


def _require_integrand(integrand) -> Integrand:
    if not isinstance(integrand, Integrand):
        raise CompatibilityError(
            f"{type(integrand).__name__} is not declared as a function of the surrogate level; "
            "wrap it in nsquad.core.Integrand")
    return integrand


def weighted_samples(run: NSRun, integrand: Integrand, *, topup: bool = False,
                     endpoint: str = "right",
                     scheme: ContractionScheme | str | None = None) -> WeightedSampleSet:
    """Quadrature weights of a run against a non-negative integrand."""
    integrand = _require_integrand(integrand)
    scheme = ContractionScheme(scheme or run.scheme)
    n = len(run.dead)
    log_xi = contraction_log_weights(scheme, n, run.J)
    values = _node_values(run, integrand, endpoint)
    positions = [d.position for d in run.dead]
    levels = run.levels
    if topup and run.final_live:
        rem = remaining_log_mass(scheme, n, run.J)
        live_levels = run.live_levels
        log_xi = np.concatenate([log_xi, np.full(len(live_levels), rem - math.log(len(live_levels)))])
        values = np.concatenate([values, _integrand_values(integrand, live_levels)])
        positions = positions + [p for p, _ in run.final_live]
        levels = np.concatenate([levels, live_levels])
    if np.any(values < 0):
        raise ValueError(f"integrand {integrand.name!r} takes negative values; "
                         "use signed_evidence for a signed integral")
    pos = values > 0
    log_z = logsumexp(log_xi[pos] + np.log(values[pos])) if pos.any() else NEG_INF
    return WeightedSampleSet(positions, levels, log_xi, values, log_z, integrand.name,
                             live_from=n)


def log_evidence(run: NSRun, integrand: Integrand, *, topup: bool = False,
                 endpoint: str = "right", scheme: ContractionScheme | str | None = None) -> float:
    """log of sum_i xi_i L(x_i); -inf when no dead sample carries mass."""
    return weighted_samples(run, integrand, topup=topup, endpoint=endpoint, scheme=scheme).log_z


def _signed_log_pools(log_w: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """(log sum of positive parts, log sum of negative parts) of sum w * v."""
    with np.errstate(divide="ignore"):
        la = log_w + np.log(np.abs(values))
    pos, neg = values > 0, values < 0
    return (logsumexp(la[pos]) if pos.any() else NEG_INF,
            logsumexp(la[neg]) if neg.any() else NEG_INF)


def _combine(log_pos: float, log_neg: float) -> float:
    if log_pos >= log_neg:
        return math.exp(log_diff_exp(log_pos, log_neg)) if log_pos > NEG_INF else 0.0
    return -math.exp(log_diff_exp(log_neg, log_pos))


def signed_evidence(run: NSRun, integrand: Integrand, *, topup: bool = False,
                    scheme: ContractionScheme | str | None = None) -> float:
    """sum_i xi_i L(x_i) for an integrand of either sign, on the linear scale."""
    integrand = _require_integrand(integrand)
    scheme = ContractionScheme(scheme or run.scheme)
    log_xi = contraction_log_weights(scheme, len(run.dead), run.J)
    values = _integrand_values(integrand, run.levels)
    if topup and run.final_live:
        rem = remaining_log_mass(scheme, len(run.dead), run.J)
        live = run.live_levels
        log_xi = np.concatenate([log_xi, np.full(len(live), rem - math.log(len(live)))])
        values = np.concatenate([values, _integrand_values(integrand, live)])
    return _combine(*_signed_log_pools(log_xi, values))


def reweight(run: NSRun, new_integrand: Integrand, *, topup: bool = False,
             endpoint: str = "right") -> WeightedSampleSet:
    """Weights of the same dead list against another level-set integrand."""
    return weighted_samples(run, _require_integrand(new_integrand), topup=topup, endpoint=endpoint)


# ---------------------------------------------------------------------------
# rare events


@dataclass(frozen=True)
class RareEventEstimate:
    kappa: float
    method: str
    log_p: float
    topup: bool
    never_reached: bool = False


def rare_event_log_prob(run: NSRun, kappa: float, method: str = "indicator_sum", *,
                        topup: bool = True,
                        scheme: ContractionScheme | str | None = None) -> float:
    """log mu(g > kappa) from a run; see :func:`rare_event` for the flags."""
    return rare_event(run, kappa, method, topup=topup, scheme=scheme).log_p


def rare_event(run: NSRun, kappa: float, method: str = "indicator_sum", *, topup: bool = True,
               scheme: ContractionScheme | str | None = None) -> RareEventEstimate:
    """Probability of {g > kappa}, by quadrature or by the remaining mass.

    ``indicator_sum`` sums the weights of dead samples in the event, plus
    the live share of the remaining mass when ``topup`` is set.
    ``remaining_mass`` takes the mass left just before the first dead sample
    in the event; if no dead sample got there it falls back to the live share.
    """
    scheme = ContractionScheme(scheme or run.scheme)
    kappa = float(kappa)
    levels = run.levels
    n = len(levels)
    live = run.live_levels
    live_frac = float(np.mean(live > kappa)) if len(live) else 0.0
    rem = remaining_log_mass(scheme, n, run.J)
    live_term = rem + math.log(live_frac) if live_frac > 0 else NEG_INF
    hits = np.flatnonzero(levels > kappa)

    if method == "indicator_sum":
        terms = list(contraction_log_weights(scheme, n, run.J)[hits])
        if topup:
            terms.append(live_term)
        log_p = logsumexp(terms) if terms else NEG_INF
    elif method == "remaining_mass":
        if len(hits):
            log_p = remaining_log_mass(scheme, int(hits[0]), run.J)
        else:
            log_p = live_term
    else:
        raise ValueError(f"method must be one of {RARE_EVENT_METHODS}, got {method!r}")
    return RareEventEstimate(kappa, method, float(log_p), topup,
                             never_reached=len(hits) == 0 and live_frac == 0)


def rare_event_curve(run: NSRun, kappas: Sequence[float], method: str = "indicator_sum",
                     topup: bool = True) -> np.ndarray:
    return np.array([rare_event_log_prob(run, k, method, topup=topup) for k in kappas])


# ---------------------------------------------------------------------------
# moments and distribution functions


def _statistic_values(ws: WeightedSampleSet, statistic: Callable[[np.ndarray], float]) -> np.ndarray:
    return np.array([float(statistic(p)) for p in ws.positions], dtype=float)


def moment(ws: WeightedSampleSet, k: int, statistic: Callable[[np.ndarray], float]) -> float:
    """(1/Z) sum s(x_i)^k L(x_i) xi_i over a weighted sample set."""
    if k < 0 or int(k) != k:
        raise ValueError(f"moment order must be a non-negative integer, got {k}")
    if ws.log_z == NEG_INF:
        raise UndefinedMoment(f"integrand {ws.integrand!r} has zero estimated integral")
    if k == 0:
        return 1.0
    s = _statistic_values(ws, statistic) ** int(k)
    lw = ws.log_weights
    keep = lw > NEG_INF
    return _combine(*_signed_log_pools(lw[keep], s[keep]))


def moments(run: NSRun, integrand: Integrand, k: int | Iterable[int],
            statistic: Callable[[np.ndarray], float], *, topup: bool = False):
    """Normalized moment(s) of a scalar statistic under L dmu / Z."""
    ws = weighted_samples(run, integrand, topup=topup)
    if isinstance(k, (int, np.integer)):
        return moment(ws, int(k), statistic)
    return [moment(ws, int(j), statistic) for j in k]


@dataclass(frozen=True, eq=False)
class CDFTable:
    """Weighted step CDF: F(t) = cumulative[j] for values[j] <= t < values[j+1]."""

    values: np.ndarray
    cumulative: np.ndarray

    def __call__(self, t: float) -> float:
        j = int(np.searchsorted(self.values, t, side="right"))
        return 0.0 if j == 0 else float(self.cumulative[j - 1])

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.cumulative.tolist()))


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Estimated survival of the surrogate: log X(lambda) just above each
    distinct dead level, plus the live ensemble beyond the last one."""

    levels: np.ndarray
    log_x: np.ndarray
    live_levels: np.ndarray
    log_remaining: float

    def log_survival(self, lam: float, live: bool = True) -> float:
        """log of the estimated mu(g > lam)."""
        j = int(np.searchsorted(self.levels, lam, side="right"))
        if j < len(self.levels):
            return 0.0 if j == 0 else float(self.log_x[j - 1])
        if live and len(self.live_levels):
            frac = float(np.mean(self.live_levels > lam))
            return self.log_remaining + math.log(frac) if frac > 0 else NEG_INF
        return float(self.log_x[-1]) if len(self.log_x) else 0.0

    def survival(self, lam, live: bool = True):
        if np.ndim(lam) == 0:
            return math.exp(self.log_survival(float(lam), live))
        return np.array([math.exp(self.log_survival(float(x), live)) for x in np.ravel(lam)])

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.levels.tolist(), self.log_x.tolist()))


def survival_curve(run: NSRun, scheme: ContractionScheme | str | None = None) -> SurvivalCurve:
    """Pair each distinct dead level with the remaining mass after its tie group."""
    scheme = ContractionScheme(scheme or run.scheme)
    levels = run.levels
    n = len(levels)
    if n:
        last = np.flatnonzero(np.append(levels[1:] != levels[:-1], True))
        uniq = levels[last]
        if scheme is ContractionScheme.EXPONENTIAL:
            log_x = -(last + 1.0) / run.J
        else:
            log_x = -(last + 1.0) * math.log1p(1.0 / run.J)
    else:
        uniq, log_x = np.empty(0), np.empty(0)
    return SurvivalCurve(uniq, log_x, np.sort(run.live_levels), remaining_log_mass(scheme, n, run.J))


def survival_at(run: NSRun, lam: float, live: bool = True) -> float:
    return survival_curve(run).survival(lam, live)


def empirical_cdf(run: NSRun, integrand: Integrand, statistic: Callable[[np.ndarray], float], *,
                  topup: bool = False) -> tuple[SurvivalCurve, CDFTable]:
    """CDF of s(x) under L dmu / Z and the survival curve of the surrogate."""
    ws = weighted_samples(run, integrand, topup=topup)
    w = ws.weights
    s = _statistic_values(ws, statistic)
    keep = w > 0
    order = np.argsort(s[keep], kind="stable")
    vals, ww = s[keep][order], w[keep][order]
    cum = np.cumsum(ww)
    cum /= cum[-1]
    # collapse repeated statistic values onto their last cumulative value
    last = np.append(vals[1:] != vals[:-1], True)
    return survival_curve(run), CDFTable(vals[last], cum[last])


# ---------------------------------------------------------------------------
# reports


@dataclass
class EstimateReport:
    """Estimates from one run, serializable as JSON with CSV companions."""

    run: dict
    log_z: dict = field(default_factory=dict)
    rare_events: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    survival: SurvivalCurve | None = None
    cdf: CDFTable | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"run": self.run, "log_z": self.log_z, "rare_events": self.rare_events,
                "moments": self.moments, "metadata": self.metadata,
                "survival_points": len(self.survival.levels) if self.survival else 0,
                "cdf_points": len(self.cdf.values) if self.cdf else 0}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def survival_csv(self) -> str:
        return _csv(["level", "log_survival"], self.survival.points if self.survival else [])

    def cdf_csv(self) -> str:
        return _csv(["value", "cdf"], self.cdf.rows() if self.cdf else [])

    def write(self, stem: str | Path) -> list[Path]:
        stem = Path(stem)
        out = [_atomic(stem.with_suffix(".report.json"), self.to_json())]
        if self.survival is not None:
            out.append(_atomic(stem.with_suffix(".survival.csv"), self.survival_csv()))
        if self.cdf is not None:
            out.append(_atomic(stem.with_suffix(".cdf.csv"), self.cdf_csv()))
        return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
    return path


def estimate_report(run: NSRun, problem: Problem, *, kappas: Sequence[float] = (),
                    integrands: Sequence[str] | None = None, moment_orders: Sequence[int] = (),
                    statistic: str | None = None, topup_evidence: bool = False,
                    endpoint: str = "right") -> EstimateReport:
    """All estimates for one run. Rare events always carry both methods with
    the live top-up on; evidence uses ``topup_evidence`` (off by default)."""
    names = list(integrands) if integrands is not None else list(problem.integrands)
    report = EstimateReport(
        run={"problem": run.problem_name, "params": run.problem_params, "J": run.J,
             "seed": run.seed, "n_dead": len(run.dead), "scheme": run.scheme.value,
             "termination": run.termination_reason.value, "valid": run.valid},
        metadata={"evidence_topup": topup_evidence, "rare_event_topup": True,
                  "endpoint": endpoint})
    for name in names:
        ig = problem.integrand(name)
        try:
            lz = log_evidence(run, ig, topup=topup_evidence, endpoint=endpoint)
            report.log_z[name] = {"log_z": lz, "no_mass_seen": lz == NEG_INF}
        except ValueError:
            report.log_z[name] = {"value": signed_evidence(run, ig, topup=topup_evidence),
                                  "signed": True}
    for kappa in kappas:
        pair = [rare_event(run, kappa, m, topup=True) for m in RARE_EVENT_METHODS]
        for est in pair:
            report.rare_events.append({"kappa": est.kappa, "method": est.method,
                                       "log_p": est.log_p, "topup": est.topup,
                                       "never_reached": est.never_reached})
        report.rare_events.append({"kappa": float(kappa), "method": "discrepancy",
                                   "log_p": _gap(pair[0].log_p, pair[1].log_p)})
    if statistic is not None:
        stat = problem.statistic(statistic)
        ig = problem.integrand()
        ws = weighted_samples(run, ig, topup=topup_evidence)
        if ws.log_z > NEG_INF:
            for k in moment_orders:
                report.moments.append({"integrand": ig.name, "statistic": statistic, "k": int(k),
                                       "value": moment(ws, int(k), stat)})
            report.survival, report.cdf = empirical_cdf(run, ig, stat, topup=topup_evidence)
        else:
            report.metadata["moments_undefined"] = True
            report.survival = survival_curve(run)
    else:
        report.survival = survival_curve(run)
    return report


def _gap(a: float, b: float) -> float:
    if a == b:
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return abs(a - b)


__all__ = ["WeightedSampleSet", "SurvivalCurve", "CDFTable", "EstimateReport", "RareEventEstimate",
           "UndefinedMoment", "weighted_samples", "log_evidence", "signed_evidence", "reweight",
           "rare_event", "rare_event_log_prob", "rare_event_curve", "moment", "moments",
           "survival_curve", "survival_at", "empirical_cdf", "estimate_report"]
