"""One-dimensional problems: Gaussian and Cauchy tails, uniform, plateau fixtures.

Positions are a length-1 standard-normal latent ``z``; the physical value is
obtained by inverse CDF. For the Gaussian this is the identity. Working in the
latent keeps random-walk proposals on a sensible scale in heavy or bounded
tails, and the surrogate is a monotone function of ``z`` either way.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from ..core import Integrand, ParameterError, Problem, SamplerConfig, identity, indicator

SQRT2 = math.sqrt(2.0)


def _ncdf(t: float) -> float:
    return 0.5 * math.erfc(-t / SQRT2)


def _gauss_log_prior(z: np.ndarray) -> float:
    return -0.5 * float(z.dot(z))


def _gauss_draw(rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(1)


def cauchy_from_latent(t: float) -> float:
    # tan(pi (u - 1/2)) written to keep precision in both tails
    if t >= 0:
        return 1.0 / math.tan(math.pi * _ncdf(-t))
    return -1.0 / math.tan(math.pi * _ncdf(t))


def uniform_from_latent(t: float) -> float:
    return _ncdf(t)


def _latent_batch(value_of):
    def batch(rng, n):
        z = rng.standard_normal((n, 1))
        return z, np.array([value_of(float(t)) for t in z[:, 0]])
    return batch


def gaussian_problem(a: float = 6.0) -> Problem:
    """Standard normal prior, surrogate g(x) = x, event {x > a}."""
    a = float(a)
    return Problem(
        name="gaussian",
        params={"a": a},
        sample_prior=_gauss_draw,
        surrogate=lambda z: float(z[0]),
        integrands={"indicator": indicator(a), "identity": identity()},
        event_threshold=a,
        dimension=1,
        log_prior=_gauss_log_prior,
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"x": lambda z: float(z[0])},
        sampler=SamplerConfig("rwm"),
        prior_batch=_latent_batch(float),
        log_survival=lambda lam: float(special.log_ndtr(-lam)),
        exact={"indicator": float(np.exp(special.log_ndtr(-a)))},
    )


def gaussian_log_tail(a: float) -> float:
    return float(special.log_ndtr(-a))


def cauchy_log_tail(a: float) -> float:
    # P(X > a) = 1/2 - arctan(a)/pi = arctan(1/a)/pi for a > 0
    if a > 0:
        return math.log(math.atan(1.0 / a) / math.pi)
    return math.log(0.5 - math.atan(a) / math.pi)


def cauchy_problem(a: float = 100.0) -> Problem:
    """Standard Cauchy prior, surrogate g(x) = x, event {x > a}."""
    a = float(a)
    value = lambda z: cauchy_from_latent(float(z[0]))
    return Problem(
        name="cauchy",
        params={"a": a},
        sample_prior=_gauss_draw,
        surrogate=value,
        integrands={"indicator": indicator(a), "identity": identity()},
        event_threshold=a,
        dimension=1,
        log_prior=_gauss_log_prior,
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"x": value},
        sampler=SamplerConfig("rwm"),
        prior_batch=_latent_batch(cauchy_from_latent),
        log_survival=cauchy_log_tail,
        exact={"indicator": math.exp(cauchy_log_tail(a))},
    )


def uniform_problem(kappa: float = 0.9) -> Problem:
    """Uniform prior on [0, 1] with g(x) = x."""
    kappa = float(kappa)
    value = lambda z: uniform_from_latent(float(z[0]))

    def log_surv(lam):
        if lam < 0:
            return 0.0
        return math.log1p(-lam) if lam < 1 else -math.inf

    return Problem(
        name="uniform",
        params={"kappa": kappa},
        sample_prior=_gauss_draw,
        surrogate=value,
        integrands={"indicator": indicator(kappa), "identity": identity(), "one": _const(1.0)},
        event_threshold=kappa,
        dimension=1,
        log_prior=_gauss_log_prior,
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"x": value},
        sup_level=1.0,
        sampler=SamplerConfig("rwm"),
        primary_integrand="identity",
        prior_batch=_latent_batch(uniform_from_latent),
        log_survival=log_surv,
        exact={"indicator": 1.0 - min(max(kappa, 0.0), 1.0), "identity": 0.5, "one": 1.0},
    )


def _const(c: float) -> Integrand:
    return Integrand("one" if c == 1.0 else f"const_{c!r}", lambda lv: np.full(np.shape(lv), c), upper=c)


def plateau_integral(delta: float, location: str) -> float:
    if location == "min_plateau":
        return delta * delta + (1.0 - delta * delta) / 2.0
    return (1.0 - delta) / 2.0 + delta


def plateau_fixture(delta: float = 0.3, location: str = "min_plateau") -> Problem:
    """Uniform prior on [0, 1] and a surrogate with a plateau of mass delta.

    ``min_plateau``: g(x) = max(x, delta), plateau at the lowest level.
    ``max_plateau``: g(x) = min(x / (1 - delta), 1), plateau at the top.
    """
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"plateau mass must lie in (0, 1), got {delta}")
    if location not in ("min_plateau", "max_plateau"):
        raise ParameterError(f"unknown plateau location {location!r}")
    x_of = lambda z: uniform_from_latent(float(z[0]))
    if location == "min_plateau":
        g_of_x = lambda x: max(x, delta)

        def log_surv(lam):
            if lam < delta:
                return 0.0
            return math.log1p(-lam) if lam < 1 else -math.inf
    else:
        g_of_x = lambda x: min(x / (1.0 - delta), 1.0)

        def log_surv(lam):
            if lam < 0:
                return 0.0
            return math.log1p(-lam * (1.0 - delta)) if lam < 1 else -math.inf

    kappa = 0.5
    g = lambda z: g_of_x(x_of(z))
    return Problem(
        name="plateau",
        params={"delta": delta, "location": location},
        sample_prior=_gauss_draw,
        surrogate=g,
        integrands={"g": identity("g"), "indicator": indicator(kappa)},
        event_threshold=kappa,
        dimension=1,
        log_prior=_gauss_log_prior,
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"x": x_of},
        sup_level=1.0,
        sampler=SamplerConfig("rwm"),
        primary_integrand="g",
        prior_batch=_latent_batch(lambda t: g_of_x(uniform_from_latent(t))),
        log_survival=log_surv,
        exact={"g": plateau_integral(delta, location),
               "indicator": math.exp(log_surv(kappa))},
    )


def plateau_pushforward_cdf(delta: float, location: str, alpha: float) -> float:
    """CDF of X(g(x)) under the prior: uniform off the plateau window, an atom
    at the plateau's supermass beta."""
    if location == "min_plateau":
        beta = 1.0 - delta
    else:
        beta = 0.0
    if alpha < 0:
        return 0.0
    if beta <= alpha < beta + delta:
        return beta + delta
    return min(alpha, 1.0)
