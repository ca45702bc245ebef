"""Constrained sampling from the prior restricted to {g > threshold}."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import Problem, SamplerConfig


class RejectionBudgetExceeded(RuntimeError):
    def __init__(self, tries: int, threshold: float):
        super().__init__(f"no prior draw above level {threshold!r} in {tries} tries; "
                         f"constraint too rare for rejection sampling")
        self.tries = tries
        self.threshold = threshold


@dataclass
class ConstraintContext:
    threshold: float
    live_points: list  # (position, level) pairs
    rng: np.random.Generator
    budget: int = 1_000_000
    warnings: Counter = field(default_factory=Counter)
    tries: int = 0

    def strict_survivors(self) -> list:
        return [(p, lv) for p, lv in self.live_points if lv > self.threshold]

    def start(self) -> tuple[np.ndarray, float]:
        survivors = self.strict_survivors()
        if not survivors:
            raise ValueError("no live point strictly above the threshold to start a chain from")
        # floor(n U) rather than rng.integers: same law, a fraction of the call cost
        return survivors[int(len(survivors) * self.rng.random())]


def default_step_size(problem: Problem) -> float:
    return 0.5 * problem.prior_sd if problem.prior_sd else 0.5


def sample_rwm(problem: Problem, ctx: ConstraintContext, steps: int = 20,
               step_size: float | None = None) -> tuple[np.ndarray, float]:
    """Gaussian random-walk Metropolis on the prior, rejecting moves that leave
    the constraint set."""
    if problem.log_prior is None:
        raise TypeError(f"problem {problem.name!r} has no prior density for rwm")
    h = default_step_size(problem) if step_size is None else step_size
    x, lv = ctx.start()
    rng = ctx.rng
    noise = rng.standard_normal((steps,) + np.shape(x)) * h
    log_u = np.log(rng.random(steps)).tolist()
    log_prior, surrogate, thr = problem.log_prior, problem.surrogate, ctx.threshold
    lp = log_prior(x)
    accepted = 0
    for step, lu in zip(noise, log_u):
        prop = x + step
        lp_prop = log_prior(prop)
        if lu < lp_prop - lp:
            lv_prop = surrogate(prop)
            if lv_prop > thr:
                x, lv, lp = prop, lv_prop, lp_prop
                accepted += 1
    if accepted == 0:
        ctx.warnings["degenerate_chain"] += 1
    return x, float(lv)


def sample_pcn(problem: Problem, ctx: ConstraintContext, steps: int = 20,
               beta: float = 0.3) -> tuple[np.ndarray, float]:
    """Preconditioned Crank-Nicolson moves; the proposal keeps the Gaussian
    prior invariant, so acceptance is just the constraint."""
    if not problem.gaussian_prior:
        raise TypeError(f"problem {problem.name!r} prior is not i.i.d. standard normal")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    x, lv = ctx.start()
    rng = ctx.rng
    noise = rng.standard_normal((steps,) + np.shape(x)) * beta
    rho = math.sqrt(1.0 - beta * beta)
    surrogate, thr = problem.surrogate, ctx.threshold
    accepted = 0
    for step in noise:
        prop = rho * x + step
        lv_prop = surrogate(prop)
        if lv_prop > thr:
            x, lv = prop, lv_prop
            accepted += 1
    if accepted == 0:
        ctx.warnings["degenerate_chain"] += 1
    return x, float(lv)


def sample_rejection(problem: Problem, ctx: ConstraintContext,
                     max_tries: int | None = None) -> tuple[np.ndarray, float]:
    """Draw from the prior until the level clears the threshold."""
    max_tries = ctx.budget if max_tries is None else max_tries
    rng, thr = ctx.rng, ctx.threshold
    if problem.prior_batch is not None:
        tries, chunk = 0, 64
        while tries < max_tries:
            n = min(chunk, max_tries - tries)
            positions, levels = problem.prior_batch(rng, n)
            hit = np.flatnonzero(levels > thr)
            if hit.size:
                k = int(hit[0])
                ctx.tries += tries + k + 1
                return np.asarray(positions[k]), float(levels[k])
            tries += n
            chunk = min(chunk * 4, 1 << 16)
        ctx.tries += tries
        raise RejectionBudgetExceeded(tries, thr)
    for t in range(1, max_tries + 1):
        x = problem.sample_prior(rng)
        lv = problem.surrogate(x)
        if lv > thr:
            ctx.tries += t
            return x, float(lv)
    ctx.tries += max_tries
    raise RejectionBudgetExceeded(max_tries, thr)


def sample_slice_1d(problem: Problem, ctx: ConstraintContext, steps: int = 10,
                    initial_width: float = 1.0, max_steps_out: int = 1000) -> tuple[np.ndarray, float]:
    """Univariate slice sampling with stepping out on prior density times the
    constraint indicator."""
    if problem.log_prior is None:
        raise TypeError(f"problem {problem.name!r} has no prior density for slice sampling")
    x, lv = ctx.start()
    if np.size(x) != 1:
        raise TypeError("slice sampler needs a one-dimensional sample space")
    rng, thr = ctx.rng, ctx.threshold
    log_prior, surrogate = problem.log_prior, problem.surrogate
    shape, dtype = np.shape(x), np.asarray(x).dtype
    x0 = float(np.ravel(x)[0])

    def log_target(v):
        p = np.full(shape, v, dtype=dtype)
        lp = log_prior(p)
        if lp == -math.inf:
            return lp, None
        lev = surrogate(p)
        return (lp, lev) if lev > thr else (-math.inf, None)

    lp0 = float(log_prior(np.full(shape, x0, dtype=dtype)))
    w = initial_width
    for _ in range(steps):
        y = lp0 - rng.standard_exponential()
        left = x0 - w * rng.random()
        right = left + w
        j = int(max_steps_out * rng.random())
        k = max_steps_out - 1 - j
        while j > 0 and log_target(left)[0] > y:
            left -= w
            j -= 1
        while k > 0 and log_target(right)[0] > y:
            right += w
            k -= 1
        while True:
            v = left + (right - left) * rng.random()
            lp, lev = log_target(v)
            if lp > y:
                x0, lp0, lv = v, lp, lev
                break
            if v < x0:
                left = v
            else:
                right = v
            if right - left < 1e-300:
                ctx.warnings["degenerate_chain"] += 1
                break
    return np.full(shape, x0, dtype=dtype), float(lv)


def draw(problem: Problem, ctx: ConstraintContext, cfg: SamplerConfig) -> tuple[np.ndarray, float]:
    """Dispatch on the sampler tag."""
    kind = cfg.kind
    if kind == "rwm":
        return sample_rwm(problem, ctx, cfg.n_steps(), cfg.step_size)
    if kind == "pcn":
        return sample_pcn(problem, ctx, cfg.n_steps(), cfg.beta)
    if kind == "slice":
        return sample_slice_1d(problem, ctx, cfg.n_steps(), cfg.initial_width)
    if kind == "rejection":
        return sample_rejection(problem, ctx, cfg.max_tries)
    raise ValueError(f"unknown sampler {kind!r}")
