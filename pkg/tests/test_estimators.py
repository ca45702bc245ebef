import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsquad.core import (CompatibilityError, ContractionScheme, DeadRecord, Integrand, NSRun,
                         Termination, dumps_run, indicator, loads_run)
from nsquad.engine import EngineConfig, run
from nsquad.estimators import (UndefinedMoment, empirical_cdf, estimate_report, log_evidence,
                               moment, moments, rare_event, rare_event_curve, rare_event_log_prob,
                               reweight, signed_evidence, survival_curve, weighted_samples)
from nsquad.problems import gaussian_problem, uniform_problem

EXP, BETA = ContractionScheme.EXPONENTIAL, ContractionScheme.BETA_MEAN


def const(c):
    return Integrand(f"const_{c}", lambda lv: np.full(np.shape(lv), c), upper=c)


@pytest.fixture(scope="module")
def gauss_run():
    return run(gaussian_problem(6.0), EngineConfig(J=50, N=3000, seed=17, termination_epsilon=0.01))


@pytest.fixture(scope="module")
def uniform_runs():
    prob = uniform_problem()
    return [run(prob, EngineConfig(J=50, N=1000, seed=s)) for s in range(100)]


def synthetic_run(levels, J, scheme=EXP, live=()):
    dead = [DeadRecord(np.array([lv]), float(lv), i + 1, 1) for i, lv in enumerate(levels)]
    return NSRun("synthetic", J, len(dead), scheme, 0, dead,
                 [(np.array([lv]), float(lv)) for lv in live], Termination.BUDGET_EXHAUSTED)


# ------------------------------------------------------------------ evidence

@pytest.mark.parametrize("c", [1.0, 0.25, 7.0])
def test_constant_integrand(gauss_run, c):
    n, J = len(gauss_run.dead), gauss_run.J
    expect = math.log(c) + math.log(-math.expm1(-n / J))
    assert log_evidence(gauss_run, const(c)) == pytest.approx(expect, abs=1e-12)
    # with the live top-up the whole prior mass is accounted for
    assert log_evidence(gauss_run, const(c), topup=True) == pytest.approx(math.log(c), abs=1e-12)


def test_uniform_identity_evidence(uniform_runs):
    z = [math.exp(log_evidence(r, uniform_problem().integrand("identity"))) for r in uniform_runs]
    assert abs(np.mean(z) - 0.5) < 0.02


def test_no_mass_seen_is_negative_infinity(gauss_run):
    assert log_evidence(gauss_run, indicator(1e9)) == -math.inf


def test_weights_are_normalized(gauss_run):
    ws = weighted_samples(gauss_run, indicator(6.0), topup=True)
    lw = ws.log_weights
    assert abs(np.logaddexp.reduce(lw[lw > -np.inf])) < 1e-10


def test_left_endpoint_is_a_lower_sum(gauss_run):
    ig = gaussian_problem().integrand("indicator")
    assert log_evidence(gauss_run, ig, endpoint="left") <= log_evidence(gauss_run, ig)
    with pytest.raises(ValueError):
        log_evidence(gauss_run, ig, endpoint="middle")


def test_negative_integrand_needs_signed_evidence(gauss_run):
    ident = gaussian_problem().integrand("identity")
    with pytest.raises(ValueError):
        log_evidence(gauss_run, ident)
    # the prior mean of x is 0; the top-up carries the far tail
    assert abs(signed_evidence(gauss_run, ident, topup=True)) < 0.5


def test_signed_evidence_agrees_with_log_evidence_for_positive(uniform_runs):
    r = uniform_runs[0]
    ig = uniform_problem().integrand("identity")
    assert signed_evidence(r, ig) == pytest.approx(math.exp(log_evidence(r, ig)), rel=1e-12)


# ------------------------------------------------------------------ reweight

def test_reweight_same_integrand_bit_for_bit(gauss_run):
    ig = gaussian_problem().integrand("indicator")
    assert reweight(gauss_run, ig).log_z == log_evidence(gauss_run, ig)


@pytest.mark.parametrize("a,b", [(2.0, 0.5), (0.1, 3.0)])
def test_reweight_affine(uniform_runs, a, b):
    r = uniform_runs[1]
    ig = uniform_problem().integrand("identity")
    aff = Integrand("affine", lambda lv: a * lv + b, upper=a + b)
    z = math.exp(log_evidence(r, ig, topup=True))
    z2 = math.exp(reweight(r, aff, topup=True).log_z)
    assert z2 == pytest.approx(a * z + b, rel=1e-12)


def test_reweight_rejects_undeclared_integrand(gauss_run):
    with pytest.raises(CompatibilityError):
        reweight(gauss_run, lambda x: x)


def test_threshold_family_is_monotone(gauss_run):
    kappas = np.linspace(-2, 7, 40)
    for method in ("indicator_sum", "remaining_mass"):
        curve = rare_event_curve(gauss_run, kappas, method)
        assert np.all(np.diff(curve) <= 0)


# ---------------------------------------------------------------- rare events

def test_threshold_below_all_levels_has_probability_one(gauss_run):
    assert rare_event_log_prob(gauss_run, -1e9, "remaining_mass") == 0.0
    assert rare_event_log_prob(gauss_run, -1e9, "indicator_sum") == pytest.approx(0.0, abs=1e-12)


def test_remaining_mass_is_index_of_first_hit(gauss_run):
    K = int(np.flatnonzero(gauss_run.levels > 6.0)[0]) + 1
    assert rare_event_log_prob(gauss_run, 6.0, "remaining_mass") == -(K - 1) / gauss_run.J


def test_never_reached_flag(gauss_run):
    est = rare_event(gauss_run, 1e9)
    assert est.never_reached and est.log_p == -math.inf
    assert not rare_event(gauss_run, 6.0).never_reached
    with pytest.raises(ValueError):
        rare_event(gauss_run, 6.0, "bisection")


def test_uniform_rare_event_both_methods():
    prob = uniform_problem(0.9)
    runs = [run(prob, EngineConfig(J=25, N=200, seed=s)) for s in range(200)]
    for method in ("indicator_sum", "remaining_mass"):
        lp = np.array([rare_event_log_prob(r, 0.9, method) for r in runs])
        se = lp.std(ddof=1) / math.sqrt(len(lp))
        assert abs(lp.mean() - math.log(0.1)) < 3 * se, method


# ------------------------------------------------------------------- moments

def test_zeroth_moment_is_one(gauss_run):
    assert moments(gauss_run, indicator(6.0), 0, lambda x: x[0]) == 1.0


def test_undefined_moment(gauss_run):
    with pytest.raises(UndefinedMoment):
        moments(gauss_run, indicator(1e9), 1, lambda x: x[0])


def test_uniform_first_moment(uniform_runs):
    prob = uniform_problem()
    m = [moments(r, prob.integrand("one"), 1, prob.statistic("x")) for r in uniform_runs]
    assert abs(np.mean(m) - 0.5) < 0.02


def inverse_mills(a):
    with mpmath.workdps(50):
        phi = mpmath.npdf(a)
        tail = mpmath.ncdf(-a)
        return float(phi / tail)


def test_truncated_normal_mean():
    prob = gaussian_problem(6.0)
    vals = []
    for s in range(20):
        r = run(prob, EngineConfig(J=50, N=5000, seed=100 + s, termination_epsilon=0.01))
        vals.append(moments(r, prob.integrand(), 1, prob.statistic("x"), topup=True))
    assert abs(np.mean(vals) - inverse_mills(6.0)) < 0.05


def test_signed_moments_of_symmetric_prior():
    # dead samples of N(0,1) under L = 1: odd moment near 0, even near 1
    prob = gaussian_problem()
    r = run(prob, EngineConfig(J=50, N=1500, seed=3))
    m1, m2 = moments(r, const(1.0), [1, 2], prob.statistic("x"), topup=True)
    assert abs(m1) < 0.3
    assert m2 == pytest.approx(1.0, abs=0.3)
    with pytest.raises(ValueError):
        moment(weighted_samples(r, const(1.0)), -1, prob.statistic("x"))


# --------------------------------------------------------- CDF and survival

def test_cdf_reaches_one_and_is_monotone(gauss_run):
    _, cdf = empirical_cdf(gauss_run, indicator(6.0), lambda x: x[0], topup=True)
    assert cdf(math.inf) == 1.0
    assert cdf(-math.inf) == 0.0
    assert np.all(np.diff(cdf.cumulative) >= 0)
    assert np.all(np.diff(cdf.values) > 0)
    # right-continuous: F at a jump equals the value after it
    t = cdf.values[len(cdf.values) // 2]
    assert cdf(t) == cdf.cumulative[len(cdf.values) // 2]


def test_survival_curve_is_non_increasing(gauss_run):
    sc = survival_curve(gauss_run)
    assert np.all(sc.log_x <= 0)
    assert np.all(np.diff(sc.log_x) < 0)
    grid = np.linspace(-5, 8, 300)
    s = sc.survival(grid)
    assert np.all(np.diff(s) <= 0)
    assert sc.survival(-1e9) == 1.0


def test_survival_groups_ties():
    r = synthetic_run([0.1, 0.1, 0.1, 0.5, 0.7], J=4, live=[0.8, 0.9, 0.95, 1.0])
    sc = survival_curve(r)
    assert sc.levels.tolist() == [0.1, 0.5, 0.7]
    assert sc.log_x.tolist() == [-3 / 4, -4 / 4, -5 / 4]
    assert sc.log_survival(0.85) == pytest.approx(-5 / 4 + math.log(0.75))


# ------------------------------------------------------- replay and schemes

def test_replay_after_serialization_is_bit_exact(gauss_run):
    prob = gaussian_problem(6.0)
    back = loads_run(dumps_run(gauss_run))
    kw = dict(kappas=[4.0, 5.0, 6.0], moment_orders=[1, 2], statistic="x")
    a = estimate_report(gauss_run, prob, **kw)
    b = estimate_report(back, prob, **kw)
    assert a.to_json() == b.to_json()
    assert a.survival_csv() == b.survival_csv()
    assert a.cdf_csv() == b.cdf_csv()


def test_report_carries_both_methods_and_gap(gauss_run, tmp_path):
    rep = estimate_report(gauss_run, gaussian_problem(6.0), kappas=[5.0, 6.0])
    methods = [e["method"] for e in rep.rare_events]
    assert methods == ["indicator_sum", "remaining_mass", "discrepancy"] * 2
    for i in (0, 3):
        gap = rep.rare_events[i + 2]["log_p"]
        assert gap == pytest.approx(abs(rep.rare_events[i]["log_p"] - rep.rare_events[i + 1]["log_p"]))
    paths = rep.write(tmp_path / "sub" / "r")
    assert sorted(p.name for p in paths) == ["r.report.json", "r.survival.csv"]


@settings(max_examples=50)
@given(J=st.integers(10, 200), mult=st.integers(2, 30), seed=st.integers(0, 2 ** 32 - 1))
def test_scheme_consistency_bound(J, mult, seed):
    rng = np.random.default_rng(seed)
    N = mult * J
    levels = np.sort(rng.standard_normal(N))
    r = synthetic_run(levels, J)
    ig = Integrand("exp", np.exp)
    gap = abs(log_evidence(r, ig, scheme=EXP) - log_evidence(r, ig, scheme=BETA))
    assert gap <= N * abs(1 / J - math.log((J + 1) / J))


def test_scheme_consistency_on_engine_run(gauss_run):
    N, J = len(gauss_run.dead), gauss_run.J
    ig = gaussian_problem().integrand("indicator")
    gap = abs(log_evidence(gauss_run, ig, scheme=EXP) - log_evidence(gauss_run, ig, scheme=BETA))
    assert gap <= N * abs(1 / J - math.log((J + 1) / J))
