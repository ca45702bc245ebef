"""Benchmark problems, addressed by name."""
from __future__ import annotations

import dataclasses
import inspect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import Integrand, ParameterError, Problem
from .beam import beam_problem
from .double_well import double_well_problem
from .labyrinth import labyrinth_problem
from .simple import cauchy_problem, gaussian_problem, plateau_fixture, uniform_problem

REGISTRY: dict[str, Callable[..., Problem]] = {
    "gaussian": gaussian_problem,
    "cauchy": cauchy_problem,
    "uniform": uniform_problem,
    "plateau": plateau_fixture,
    "double_well": double_well_problem,
    "beam": beam_problem,
    "labyrinth": labyrinth_problem,
}


class UnknownProblem(KeyError):
    pass


def problem_parameters(name: str) -> dict:
    factory = _factory(name)
    return {k: p.default for k, p in inspect.signature(factory).parameters.items()}


def _factory(name: str) -> Callable[..., Problem]:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; known: {sorted(REGISTRY)}") from None


def get_problem(name: str, **params) -> Problem:
    """Build a registered problem; parameters not taken by it are rejected."""
    factory = _factory(name)
    allowed = inspect.signature(factory).parameters
    unknown = set(params) - set(allowed)
    if unknown:
        raise ParameterError(f"problem {name!r} takes no parameters {sorted(unknown)}")
    return factory(**{k: v for k, v in params.items() if v is not None})


def transform_surrogate(problem: Problem, forward: Callable[[float], float],
                        inverse: Callable[[np.ndarray], np.ndarray]) -> Problem:
    """Same problem with surrogate ``forward(g)`` for increasing ``forward``.

    Integrands are re-expressed on the new levels through ``inverse`` so they
    keep their values at every position.
    """
    def lift(ig: Integrand) -> Integrand:
        return Integrand(ig.name, lambda lv, f=ig.of_level: f(inverse(lv)), ig.upper)

    g = problem.surrogate
    batch = problem.prior_batch
    return dataclasses.replace(
        problem,
        surrogate=lambda x: forward(g(x)),
        integrands={k: lift(v) for k, v in problem.integrands.items()},
        event_threshold=forward(problem.event_threshold),
        sup_level=forward(problem.sup_level),
        prior_batch=None if batch is None else (
            lambda rng, n: (lambda p, lv: (p, forward(lv)))(*batch(rng, n))),
        log_survival=None if problem.log_survival is None else (
            lambda lam: problem.log_survival(float(inverse(np.asarray(lam))))),
    )


__all__ = ["REGISTRY", "get_problem", "problem_for_run", "monte_carlo_oracle", "OracleEstimate", "problem_parameters", "transform_surrogate", "UnknownProblem",
           "gaussian_problem", "cauchy_problem", "uniform_problem", "plateau_fixture",
           "double_well_problem", "beam_problem", "labyrinth_problem"]


def problem_for_run(run) -> Problem:
    """Rebuild the problem a stored run was drawn from."""
    return get_problem(run.problem_name, **run.problem_params)


@dataclass(frozen=True)
class OracleEstimate:
    """Brute-force Monte Carlo estimate of mu(g > kappa) with a bootstrap interval."""

    problem: str
    params: dict
    n: int
    hits: int
    seed: int
    p: float
    se: float
    ci_low: float
    ci_high: float
    upper_bound_only: bool = False

    @property
    def log_p(self) -> float:
        return math.log(self.p) if self.p > 0 else -math.inf

    @property
    def log_se(self) -> float:
        """Delta-method standard error of log p."""
        return self.se / self.p if self.p > 0 else math.inf

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["log_p"] = self.log_p
        return d


def monte_carlo_oracle(problem: Problem, n: int, seed: int = 0, *, bootstrap: int = 1000,
                       level: float = 0.95, chunk: int = 10_000) -> OracleEstimate:
    """Count prior draws in the event {g > kappa}.

    The interval resamples the hit count from Binomial(n, p_hat). With no
    hits only the rule-of-three upper bound 3/n is reported, flagged.
    """
    if problem.prior_batch is None:
        raise TypeError(f"problem {problem.name!r} has no vectorized prior")
    rng = np.random.Generator(np.random.Philox(key=seed))
    hits = 0
    for start in range(0, n, chunk):
        _, levels = problem.prior_batch(rng, min(chunk, n - start))
        hits += int(np.count_nonzero(levels > problem.event_threshold))
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    if hits == 0:
        lo, hi, flag = 0.0, 3.0 / n, True
    else:
        boot = rng.binomial(n, p, size=bootstrap) / n
        a = (1.0 - level) / 2.0
        lo, hi = (float(q) for q in np.quantile(boot, [a, 1.0 - a]))
        flag = False
    return OracleEstimate(problem.name, dict(problem.params), int(n), hits, int(seed), p, se, lo, hi, flag)
