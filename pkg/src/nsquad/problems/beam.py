"""Cantilever beam whose flexibility has point inclusions at Poisson times.

Tip deflection under a point load P at the free end:

    d(x) = -P (c L x^2 / 2 - c x^3 / 6 + sum_{T_i <= x} w (L - T_i) x)

The inclusion process is truncated to ``max_inclusions`` exponential gaps.
Sampling happens on a standard-normal latent of that length; gap i is the
inverse exponential CDF of Phi(z_i), which routes through the unit
hypercube but lets Gaussian samplers (rwm, pCN) drive it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from ..core import Problem, SamplerConfig, indicator


@dataclass(frozen=True)
class BeamSpec:
    L: float = 5.0
    c: float = 1.0
    P: float = 0.01
    w: float = 0.05
    rate: float = 1.0
    max_inclusions: int = 20
    deflection_threshold: float = -0.55


def beam_deflection(spec: BeamSpec, times, x: float | None = None) -> float:
    """Deflection d(x) for inclusion times (default: at the tip x = L)."""
    L = spec.L
    x = L if x is None else x
    t = np.asarray(times, dtype=float)
    t = t[t <= x]
    return -spec.P * (spec.c * L * x * x / 2.0 - spec.c * x ** 3 / 6.0
                      + spec.w * x * float(np.sum(L - t)))


def deflection_curve(spec: BeamSpec, times, xs: np.ndarray) -> np.ndarray:
    return np.array([beam_deflection(spec, times, float(x)) for x in xs])


def times_from_unit(spec: BeamSpec, u) -> np.ndarray:
    """Cumulative inclusion times from points of the unit hypercube."""
    gaps = -np.log1p(-np.asarray(u, dtype=float)) / spec.rate
    return np.cumsum(gaps)


def times_from_latent(spec: BeamSpec, z) -> np.ndarray:
    # -log(1 - Phi(z)) = -log Phi(-z), computed without cancellation
    gaps = -special.log_ndtr(-np.asarray(z, dtype=float)) / spec.rate
    return np.cumsum(gaps, axis=-1)


def beam_prior_sample(spec: BeamSpec, rng: np.random.Generator) -> np.ndarray:
    """Inclusion times within the beam for one prior draw."""
    t = np.cumsum(rng.standard_exponential(spec.max_inclusions) / spec.rate)
    return t[t <= spec.L]


def truncation_mass(spec: BeamSpec) -> float:
    """Poisson(rate L) mass on more than max_inclusions inclusions."""
    return float(stats.poisson.sf(spec.max_inclusions, spec.rate * spec.L))


def tip_surrogate_batch(spec: BeamSpec, times: np.ndarray) -> np.ndarray:
    """-d(L) for an (n, max_inclusions) array of cumulative times."""
    L = spec.L
    inside = np.where(times <= L, L - times, 0.0).sum(axis=1)
    return spec.P * (spec.c * L ** 3 / 3.0 + spec.w * L * inside)


def mc_event_count(spec: BeamSpec, n: int, rng: np.random.Generator, chunk: int = 500_000) -> int:
    hits = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        t = np.cumsum(rng.standard_exponential((m, spec.max_inclusions)) / spec.rate, axis=1)
        hits += int(np.count_nonzero(tip_surrogate_batch(spec, t) > -spec.deflection_threshold))
    return hits


def beam_problem(L: float = 5.0, c: float = 1.0, P: float = 0.01, w: float = 0.05,
                 rate: float = 1.0, max_inclusions: int = 20,
                 deflection_threshold: float = -0.55) -> Problem:
    spec = BeamSpec(L, c, P, w, rate, int(max_inclusions), deflection_threshold)
    const = spec.P * spec.c * L ** 3 / 3.0
    scale = spec.P * spec.w * L

    def g(z):
        t = times_from_latent(spec, z)
        return const + scale * float(np.sum(L - t[t <= L]))

    def batch(rng, m):
        z = rng.standard_normal((m, spec.max_inclusions))
        return z, tip_surrogate_batch(spec, times_from_latent(spec, z))

    xs = np.linspace(0.0, L, 51)
    return Problem(
        name="beam",
        params={k: (int(v) if k == "max_inclusions" else float(v)) for k, v in asdict(spec).items()},
        sample_prior=lambda rng: rng.standard_normal(spec.max_inclusions),
        surrogate=g,
        integrands={"indicator": indicator(-deflection_threshold)},
        event_threshold=-deflection_threshold,
        dimension=spec.max_inclusions,
        log_prior=lambda z: -0.5 * float(np.dot(z, z)),
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"deflection": lambda z: -g(z),
                    "inclusions": lambda z: float(np.count_nonzero(times_from_latent(spec, z) <= L))},
        sampler=SamplerConfig("pcn", beta=0.3),
        prior_batch=batch,
        trajectory=lambda z: deflection_curve(spec, times_from_latent(spec, z), xs),
    )
