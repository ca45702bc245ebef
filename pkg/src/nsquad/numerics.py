"""Log-domain arithmetic and generalized inverses of step functions."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

NEG_INF = -math.inf
POS_INF = math.inf

# log(w) with w in [0, 1]; NEG_INF encodes w = 0
LogWeight = float


def logsumexp(terms: Iterable[float] | np.ndarray) -> float:
    """Return log(sum(exp(terms))) by factoring out the largest term.

    Raises ValueError for an empty input. Returns NEG_INF iff every term is
    NEG_INF.
    """
    v = np.asarray(terms if isinstance(terms, np.ndarray) else list(terms), dtype=float)
    if v.size == 0:
        raise ValueError("logsumexp needs at least one term")
    m = float(v.max())
    if m == NEG_INF:
        return NEG_INF
    if m == POS_INF:
        return POS_INF
    return m + math.log(float(np.exp(v - m).sum()))


def log_diff_exp(a: float, b: float) -> float:
    """log(exp(a) - exp(b)) for a >= b."""
    if a < b:
        raise ValueError(f"negative mass: log_diff_exp({a!r}, {b!r}) needs a >= b")
    if b == NEG_INF:
        return a
    if a == b:
        return NEG_INF
    d = b - a
    # log1p(-e^d) loses accuracy as d -> 0; expm1 branch covers it
    if d > -math.log(2.0):
        return a + math.log(-math.expm1(d))
    return a + math.log1p(-math.exp(d))


def log1mexp(d: float) -> float:
    """log(1 - exp(d)) for d <= 0."""
    return log_diff_exp(0.0, d)


@dataclass(frozen=True)
class StepFunction:
    """Non-decreasing, piecewise-constant, left-continuous function on R.

    ``T(x) = left_limit_value`` for ``x <= x_1`` and ``T(x) = y_k`` for
    ``x_k < x <= x_{k+1}``; i.e. the jump at ``x_k`` happens just to the right
    of ``x_k``.
    """

    breakpoints: tuple[tuple[float, float], ...]
    left_limit_value: float

    def __post_init__(self):
        bps = tuple((float(x), float(y)) for x, y in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        xs = [x for x, _ in bps]
        ys = [y for _, y in bps]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing in x")
        prev = self.left_limit_value
        for y in ys:
            if y < prev:
                raise ValueError("step function values must be non-decreasing")
            prev = y
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)

    @property
    def xs(self) -> list[float]:
        return self._xs

    @property
    def ys(self) -> list[float]:
        return self._ys

    def __call__(self, x: float) -> float:
        # number of breakpoints strictly left of x
        k = bisect.bisect_left(self._xs, x)
        return self.left_limit_value if k == 0 else self._ys[k - 1]

    def right(self, x: float) -> float:
        """Right-continuous version T(x+)."""
        k = bisect.bisect_right(self._xs, x)
        return self.left_limit_value if k == 0 else self._ys[k - 1]

    @property
    def sup(self) -> float:
        return self._ys[-1] if self._ys else self.left_limit_value


def generalized_inverse(T: StepFunction, y: float) -> float:
    """inf{x : T(x) >= y} with inf of the empty set = +inf."""
    if y <= T.left_limit_value:
        return NEG_INF
    # first breakpoint whose post-jump value reaches y
    k = bisect.bisect_left(T.ys, y)
    if k == len(T.ys):
        return POS_INF
    return T.xs[k]


def galois_check(T: StepFunction, x: float, y: float) -> tuple[bool, bool]:
    """Both sides of ``y <= T(x)  <=>  T^-(y) <= x``.

    The equivalence needs the right-continuous version of T; the inverse is
    the same for either version.
    """
    return (y <= T.right(x), generalized_inverse(T, y) <= x)

