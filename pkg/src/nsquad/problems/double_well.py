"""Overdamped Langevin diffusion in the double-well potential
V(x) = -(a/2) x^2 + (b/4) x^4, started in the right well.

Sample space: the standard-normal driving increments of an Euler-Maruyama
path. Surrogate: g = -min_t x_t (higher means the path got further towards
the left well); the event {min_t x_t <= barrier} is {g > -barrier}.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from ..core import Problem, SamplerConfig, indicator


@dataclass(frozen=True)
class DoubleWellSpec:
    a: float = 2.0
    b: float = 0.5
    sigma: float = 0.65
    T: float = 10.0
    dt: float = 0.01
    x0: float = 2.0
    barrier: float = -1.5

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def wells(self) -> tuple[float, float]:
        r = math.sqrt(self.a / self.b)
        return (-r, r)


def potential(x, a=2.0, b=0.5):
    return -0.5 * a * x * x + 0.25 * b * x ** 4


def potential_grad(x, a=2.0, b=0.5):
    return -a * x + b * x ** 3


@numba.njit(cache=True)
def _path(z, x0, a, b, sigma, dt):
    n = z.shape[0]
    out = np.empty(n + 1)
    out[0] = x0
    x = x0
    s = sigma * math.sqrt(dt)
    for k in range(n):
        x = x - (-a * x + b * x * x * x) * dt + s * z[k]
        out[k + 1] = x
    return out


@numba.njit(cache=True)
def _path_min(z, x0, a, b, sigma, dt):
    x = x0
    m = x0
    s = sigma * math.sqrt(dt)
    for k in range(z.shape[0]):
        x = x - (-a * x + b * x * x * x) * dt + s * z[k]
        if x < m:
            m = x
    return m


@numba.njit(cache=True)
def _batch_min(z, x0, a, b, sigma, dt):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _path_min(z[i], x0, a, b, sigma, dt)
    return out


def simulate_double_well(spec: DoubleWellSpec, increments: np.ndarray) -> np.ndarray:
    """Euler-Maruyama path x_0..x_n for standard-normal increments."""
    z = np.ascontiguousarray(increments, dtype=float)
    if z.shape != (spec.n_steps,):
        raise ValueError(f"need {spec.n_steps} increments, got shape {z.shape}")
    path = _path(z, spec.x0, spec.a, spec.b, spec.sigma, spec.dt)
    if not np.all(np.isfinite(path)):
        raise FloatingPointError("double-well path blew up; reduce dt")
    return path


def path_minimum(spec: DoubleWellSpec, increments: np.ndarray) -> float:
    m = _path_min(np.ascontiguousarray(increments, dtype=float),
                  spec.x0, spec.a, spec.b, spec.sigma, spec.dt)
    if not math.isfinite(m):
        raise FloatingPointError("double-well path blew up; reduce dt")
    return m


def batch_minimum(spec: DoubleWellSpec, increments: np.ndarray) -> np.ndarray:
    return _batch_min(np.ascontiguousarray(increments, dtype=float),
                      spec.x0, spec.a, spec.b, spec.sigma, spec.dt)


def mc_event_frequency(spec: DoubleWellSpec, n: int, rng: np.random.Generator,
                       chunk: int = 20_000) -> int:
    """Number of escaping paths among n prior paths."""
    hits = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        hits += int(np.count_nonzero(batch_minimum(spec, rng.standard_normal((m, spec.n_steps)))
                                     < spec.barrier))
    return hits


def double_well_problem(sigma: float = 0.65, dt: float = 0.01, T: float = 10.0,
                        a: float = 2.0, b: float = 0.5, x0: float = 2.0,
                        barrier: float = -1.5) -> Problem:
    spec = DoubleWellSpec(a=a, b=b, sigma=sigma, T=T, dt=dt, x0=x0, barrier=barrier)
    n = spec.n_steps

    def g(z):
        return -path_minimum(spec, z)

    def batch(rng, m):
        z = rng.standard_normal((m, n))
        return z, -batch_minimum(spec, z)

    return Problem(
        name="double_well",
        params={k: float(v) for k, v in asdict(spec).items()},
        sample_prior=lambda rng: rng.standard_normal(n),
        surrogate=g,
        integrands={"indicator": indicator(-barrier)},
        event_threshold=-barrier,
        dimension="path",
        log_prior=lambda z: -0.5 * float(np.dot(z, z)),
        gaussian_prior=True,
        prior_sd=1.0,
        statistics={"min_x": lambda z: -g(z),
                    "x_T": lambda z: float(simulate_double_well(spec, z)[-1])},
        sampler=SamplerConfig("pcn", beta=0.3),
        prior_batch=batch,
        trajectory=lambda z: simulate_double_well(spec, z),
    )
