"""The nested sampling loop with plateau-aware tie removal.

Every live particle sitting at the current minimum level is removed in one
batch; each removal consumes one contraction factor, so a tie of size n
shrinks the remaining prior mass by e^{-n/J}. Quadrature happens later in
:mod:`nsquad.estimators`, from the stored dead list.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (ContractionScheme, DeadRecord, NSRun, ParameterError, Problem,
                   SamplerConfig, Streams, Termination, contraction_log_weight,
                   remaining_log_mass)
from .numerics import NEG_INF, logsumexp
from .samplers import ConstraintContext, RejectionBudgetExceeded, draw, sample_rejection

log = logging.getLogger("nsquad.engine")


class ConstraintViolation(AssertionError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    J: int = 50
    N: int = 10_000
    scheme: ContractionScheme = ContractionScheme.EXPONENTIAL
    sampler: SamplerConfig | None = None  # None: the problem's default
    seed: int = 0
    termination_epsilon: float = 0.0
    level_equality_tolerance: float = 0.0
    rejection_budget: int = 1_000_000
    parallel_replenish: bool = False

    def __post_init__(self):
        if self.J < 1 or self.N < 1:
            raise ParameterError(f"need J >= 1 and N >= 1, got J={self.J}, N={self.N}")
        if self.termination_epsilon < 0 or self.level_equality_tolerance < 0:
            raise ParameterError("tolerances must be non-negative")
        object.__setattr__(self, "scheme", ContractionScheme(self.scheme))

    def sampler_for(self, problem: Problem) -> SamplerConfig:
        return self.sampler or problem.sampler

    def to_dict(self, problem: Problem | None = None) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        smp = self.sampler_for(problem) if problem is not None else self.sampler
        d["sampler"] = smp.to_dict() if smp else None
        return d


@dataclass
class _Progress:
    """Running quantities for the early-stop rule."""
    log_z: float = NEG_INF
    n_dead: int = 0
    terms: list = field(default_factory=list)


def early_stop_check(progress: _Progress, live_levels: np.ndarray, problem: Problem,
                     config: EngineConfig) -> bool:
    """True when the mass left above the live ensemble, weighted by the largest
    live integrand value, is below epsilon times the evidence so far."""
    eps = config.termination_epsilon
    if eps <= 0:
        return False
    log_rem = remaining_log_mass(config.scheme, progress.n_dead, config.J)
    if log_rem == NEG_INF:
        return True
    if progress.log_z == NEG_INF:
        return False
    max_live = float(np.max(problem.integrand()(live_levels)))
    if max_live <= 0:
        return True
    return log_rem + math.log(max_live) <= math.log(eps) + progress.log_z


def replenish(problem: Problem, survivors: list, threshold: float, n: int, batch: int,
              streams: Streams, config: EngineConfig, warnings: Counter) -> list:
    """Draw ``n`` new points from the prior restricted to {g > threshold}.

    Chains start from strict survivors; with none left, rejection from the
    prior is the fallback. Slot s of batch b always uses stream (b, s).
    """
    cfg = config.sampler_for(problem)
    has_start = any(lv > threshold for _, lv in survivors)

    def one(slot: int, rng):
        ctx = ConstraintContext(threshold, survivors, rng, config.rejection_budget)
        if has_start:
            pt = draw(problem, ctx, cfg)
        else:
            pt = sample_rejection(problem, ctx, config.rejection_budget)
        if ctx.warnings:
            warnings.update(ctx.warnings)
        if not pt[1] > threshold:
            raise ConstraintViolation(f"sampler returned level {pt[1]!r} <= {threshold!r}")
        return pt

    if config.parallel_replenish and n > 1:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(lambda s: one(s, streams.fresh(batch, s)), range(n)))
    return [one(s, streams.at(batch, s)) for s in range(n)]


def run(problem: Problem, config: EngineConfig) -> NSRun:
    J, N, tol = config.J, config.N, config.level_equality_tolerance
    streams = Streams(config.seed)
    warnings: Counter = Counter()

    positions = []
    levels = np.empty(J)
    for s in range(J):
        x = problem.sample_prior(streams.at(0, s))
        positions.append(x)
        levels[s] = problem.surrogate(x)

    dead: list[DeadRecord] = []
    progress = _Progress()
    integrand = problem.integrand()
    track = config.termination_epsilon > 0  # the running evidence only feeds early stopping
    reason = Termination.BUDGET_EXHAUSTED
    valid = True
    batch = 0

    while len(dead) < N:
        l_star = float(levels.min())
        tied = np.flatnonzero(levels <= l_star + tol) if tol else np.flatnonzero(levels == l_star)
        batch += 1
        n = len(tied)
        if n > 1:
            # remove in level order, then slot order, so the dead list stays sorted
            tied = tied[np.lexsort((tied, levels[tied]))]
        threshold = float(levels[tied[-1]])

        first = None
        if n == J:
            if l_star >= problem.sup_level:
                reason = Termination.FULL_PLATEAU
                break
            # nothing above the plateau is known; probe with the stream of slot 0
            ctx = ConstraintContext(threshold, [], streams.at(batch, 0), config.rejection_budget)
            try:
                first = sample_rejection(problem, ctx, config.rejection_budget)
            except RejectionBudgetExceeded:
                warnings["full_plateau"] += 1
                reason = Termination.FULL_PLATEAU
                break

        for k in tied:
            dead.append(DeadRecord(positions[k], float(levels[k]), len(dead) + 1, n))
        progress.n_dead = len(dead)
        if track:
            values = integrand(levels[tied])
            for j, v in enumerate(values):
                if v > 0:
                    progress.terms.append(contraction_log_weight(config.scheme, len(dead) - n + 1 + j, J)
                                          + math.log(v))
            if progress.terms:
                progress.log_z = logsumexp(progress.terms)
                progress.terms = [progress.log_z]

        keep = np.ones(J, dtype=bool)
        keep[tied] = False
        survivors = [(positions[k], levels[k]) for k in np.flatnonzero(keep)]
        try:
            if first is not None:
                fresh = [first] + replenish(problem, survivors, threshold, n - 1, batch,
                                            _Shifted(streams, 1), config, warnings)
            else:
                fresh = replenish(problem, survivors, threshold, n, batch, streams, config, warnings)
        except RejectionBudgetExceeded as exc:
            log.warning("run aborted: %s", exc)
            warnings["rejection_budget"] += 1
            reason, valid = Termination.ABORTED, False
            for k in tied:
                positions[k] = None
            break
        for k, (x, lv) in zip(tied, fresh):
            positions[k] = x
            levels[k] = lv

        if log.isEnabledFor(logging.DEBUG):
            log.debug(json.dumps({"batch": batch, "iteration": len(dead), "level": l_star,
                                  "log_remaining": remaining_log_mass(config.scheme, len(dead), J)}))
        if early_stop_check(progress, levels, problem, config):
            reason = Termination.REMAINING_MASS_NEGLIGIBLE
            break

    final_live = [(positions[k], float(levels[k])) for k in range(J) if positions[k] is not None]
    return NSRun(
        problem_name=problem.name,
        J=J,
        N=N,
        scheme=config.scheme,
        seed=config.seed,
        dead=dead,
        final_live=final_live,
        termination_reason=reason,
        problem_params=dict(problem.params),
        config=config.to_dict(problem),
        valid=valid,
        warnings=dict(sorted(warnings.items())),
    )


class _Shifted:
    """Streams view with slots offset, so slot 0 stays with the plateau probe."""

    def __init__(self, streams: Streams, offset: int):
        self._streams, self._offset = streams, offset

    def at(self, batch, slot):
        return self._streams.at(batch, slot + self._offset)

    def fresh(self, batch, slot):
        return self._streams.fresh(batch, slot + self._offset)
