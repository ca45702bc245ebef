import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsquad.numerics import (NEG_INF, POS_INF, StepFunction, galois_check, generalized_inverse,
                             log1mexp, log_diff_exp, logsumexp)

mpmath.mp.prec = 200

finite = st.floats(min_value=-700, max_value=700, allow_nan=False, allow_infinity=False)


def exact_lse(v):
    return mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(float(t))) for t in v))


# --- logsumexp -------------------------------------------------------------

def test_logsumexp_two_small_terms():
    oracle = float(exact_lse([-800.0, -801.0]))
    assert logsumexp([-800.0, -801.0]) == pytest.approx(oracle, abs=1e-12)
    assert logsumexp([-800.0, -801.0]) == pytest.approx(-799.68674, abs=1e-5)


def test_logsumexp_single_term_is_identity():
    assert logsumexp([-3.5]) == -3.5


def test_logsumexp_of_a_partition_of_unity():
    assert logsumexp([math.log(0.2), math.log(0.3), math.log(0.5)]) == pytest.approx(0.0, abs=1e-15)


def test_logsumexp_empty_input_is_an_error():
    with pytest.raises(ValueError):
        logsumexp([])


def test_logsumexp_neg_inf_handling():
    assert logsumexp([NEG_INF, NEG_INF]) == NEG_INF
    assert logsumexp([NEG_INF, -2.0]) == -2.0
    assert logsumexp(np.array([NEG_INF, 0.0, NEG_INF])) == 0.0


def test_logsumexp_accepts_generators():
    assert logsumexp(x for x in (0.0, 0.0)) == pytest.approx(math.log(2.0))


@given(st.lists(finite, min_size=1, max_size=40))
def test_logsumexp_matches_extended_precision(v):
    exact = exact_lse(v)
    got = logsumexp(v)
    assert abs(mpmath.mpf(got) - exact) <= 4 * math.ulp(max(abs(float(exact)), 1.0))


@given(st.lists(st.floats(min_value=-300, max_value=300), min_size=1, max_size=40))
def test_logsumexp_linear_scale_relative_error(v):
    direct = math.fsum(math.exp(t) for t in v)
    got = math.exp(logsumexp(v))
    # an error of a few ulp in log S becomes a relative error of |log S| ulp-sized steps
    tol = 4 * (math.ulp(max(abs(math.log(direct)), 1.0)) + 2.0 ** -52)
    assert abs(got - direct) <= tol * direct


@given(st.lists(finite, min_size=1, max_size=30), st.randoms())
def test_logsumexp_permutation_invariant(v, rnd):
    w = list(v)
    rnd.shuffle(w)
    a, b = logsumexp(v), logsumexp(w)
    assert abs(a - b) <= 4 * math.ulp(max(abs(a), 1.0))


@given(st.lists(st.floats(min_value=-300, max_value=300), min_size=1, max_size=30),
       st.floats(min_value=-300, max_value=300))
def test_logsumexp_translation_equivariant(v, c):
    a = logsumexp([t + c for t in v])
    b = logsumexp(v) + c
    assert abs(a - b) <= 8 * math.ulp(max(abs(a), abs(b), 1.0))


# --- log_diff_exp ----------------------------------------------------------

def test_log_diff_exp_examples():
    assert log_diff_exp(0.0, NEG_INF) == 0.0
    assert log_diff_exp(0.0, math.log(0.5)) == pytest.approx(math.log(0.5), abs=1e-15)
    oracle = float(mpmath.mpf(-10) + mpmath.log1p(-mpmath.exp(-2)))
    assert log_diff_exp(-10.0, -12.0) == pytest.approx(oracle, abs=1e-13)
    assert log_diff_exp(-10.0, -12.0) == pytest.approx(-10.14541, abs=1e-5)


def test_log_diff_exp_equal_arguments_give_zero_mass():
    assert log_diff_exp(-3.0, -3.0) == NEG_INF
    assert log_diff_exp(NEG_INF, NEG_INF) == NEG_INF


def test_log_diff_exp_rejects_negative_mass():
    with pytest.raises(ValueError):
        log_diff_exp(-2.0, -1.0)


@given(st.floats(min_value=-500, max_value=500), st.floats(min_value=1e-12, max_value=50))
def test_log_diff_exp_matches_extended_precision(a, gap):
    b = a - gap
    exact = mpmath.log(mpmath.exp(mpmath.mpf(a)) - mpmath.exp(mpmath.mpf(b)))
    got = log_diff_exp(a, b)
    assert abs(mpmath.mpf(got) - exact) <= 1e-12 * max(1.0, abs(float(exact)))


def test_log1mexp():
    assert log1mexp(math.log(0.25)) == pytest.approx(math.log(0.75))


# --- step functions --------------------------------------------------------

def point_mass_cdf(at=2.0):
    return StepFunction(((at, 1.0),), 0.0)


def test_step_function_is_left_continuous():
    T = point_mass_cdf()
    assert T(2.0) == 0.0
    assert T(2.0 + 1e-12) == 1.0
    assert T.right(2.0) == 1.0


def test_step_function_validation():
    with pytest.raises(ValueError):
        StepFunction(((1.0, 0.5), (1.0, 0.7)), 0.0)
    with pytest.raises(ValueError):
        StepFunction(((1.0, 0.5), (2.0, 0.4)), 0.0)
    with pytest.raises(ValueError):
        StepFunction(((1.0, -1.0),), 0.0)


def test_generalized_inverse_examples():
    T = point_mass_cdf()
    assert generalized_inverse(T, 0.5) == 2.0
    assert generalized_inverse(T, 0.0) == NEG_INF
    assert generalized_inverse(T, -1.0) == NEG_INF
    assert generalized_inverse(T, 1.5) == POS_INF


def test_galois_examples():
    identity_like = StepFunction(tuple((k / 10, (k + 1) / 10) for k in range(-1, 10)), 0.0)
    assert galois_check(identity_like, 1.0, 0.5) == (True, True)
    constant_zero = StepFunction((), 0.0)
    assert galois_check(constant_zero, 0.0, 1.0) == (False, False)


@st.composite
def step_functions(draw):
    """Random step functions with repeated values (so plateaus span several
    breakpoints) and a small value grid (so jumps share endpoints)."""
    n = draw(st.integers(min_value=0, max_value=8))
    xs = sorted(set(draw(st.lists(st.integers(-20, 20), min_size=n, max_size=n))))
    base = draw(st.integers(-3, 3))
    incs = draw(st.lists(st.integers(0, 2), min_size=len(xs), max_size=len(xs)))
    ys, cur = [], base
    for d in incs:
        cur += d
        ys.append(cur)
    return StepFunction(tuple(zip((float(x) for x in xs), (float(y) for y in ys))), float(base))


def brute_inverse(T, y):
    # every x in (x_k, x_{k+1}] has value y_k; the infimum of each piece is its left end
    if T.left_limit_value >= y:
        return NEG_INF
    for x, v in T.breakpoints:
        if v >= y:
            return x
    return POS_INF


probe = st.floats(min_value=-25, max_value=25, allow_nan=False).map(lambda t: round(t * 4) / 4)


@given(step_functions(), probe)
def test_generalized_inverse_matches_brute_force(T, y):
    assert generalized_inverse(T, y) == brute_inverse(T, y)


@given(step_functions(), probe, probe)
def test_galois_property(T, x, y):
    a, b = galois_check(T, x, y)
    assert a == b


def plateau_of(T, x):
    """(left end, right end) of the maximal interval around x where T is
    constant, found by scanning the breakpoints."""
    v = T(x)
    left = NEG_INF
    if v == T.left_limit_value:
        return left, v
    for bx, by in T.breakpoints:
        if by == v:  # first breakpoint reaching v: the plateau starts right after it
            left = bx
            break
    return left, v


def jump_of(T, y):
    """Jump interval (y_minus, y_plus] containing y, for y within the range."""
    prev = T.left_limit_value
    for _, by in T.breakpoints:
        if prev < y <= by:
            return prev, by
        prev = by
    return None


@given(step_functions(), probe)
def test_inverse_of_value_returns_plateau_left_end(T, x):
    left, _ = plateau_of(T, x)
    assert generalized_inverse(T, T(x)) == left


@given(step_functions(), probe)
def test_value_of_inverse_returns_jump_lower_end(T, y):
    jump = jump_of(T, y)
    if jump is None:
        return
    assert T(generalized_inverse(T, y)) == jump[0]


def round_trip_failures(n_instances=10_000, seed=2024):
    """Galois and plateau/cliff round-trip checks on random step functions;
    returns the number of violated identities."""
    rnd = random.Random(seed)
    failures = 0
    for _ in range(n_instances):
        n = rnd.randint(0, 10)
        xs = sorted(rnd.sample(range(-50, 50), n))
        base = rnd.randint(-3, 3)
        ys, cur = [], base
        for _ in xs:
            cur += rnd.choice((0, 1, 1, 2))
            ys.append(float(cur))
        T = StepFunction(tuple(zip(map(float, xs), ys)), float(base))
        x = rnd.randint(-60, 60) / 2
        y = rnd.randint(-8, 30) / 2
        a, b = galois_check(T, x, y)
        failures += a != b
        failures += generalized_inverse(T, T(x)) != plateau_of(T, x)[0]
        jump = jump_of(T, y)
        if jump is not None:
            failures += T(generalized_inverse(T, y)) != jump[0]
    return failures


def test_round_trip_properties_on_ten_thousand_instances():
    assert round_trip_failures() == 0
