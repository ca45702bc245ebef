import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse, stats
from scipy.sparse import csgraph

from nsquad.core import ParameterError
from nsquad.engine import EngineConfig, run
from nsquad.problems import (REGISTRY, UnknownProblem, get_problem, monte_carlo_oracle,
                             problem_parameters, transform_surrogate)
from nsquad.problems.beam import (BeamSpec, beam_deflection, beam_prior_sample, times_from_latent,
                                  truncation_mass)
from nsquad.problems.double_well import (DoubleWellSpec, double_well_problem, path_minimum,
                                         simulate_double_well)
from nsquad.problems.labyrinth import (GridError, goal_distance, labyrinth_surrogate, labyrinth_walk,
                                       load_map, open_grid, parse_map, walk_cells)
from nsquad.problems.simple import (cauchy_from_latent, cauchy_log_tail, gaussian_log_tail,
                                    plateau_fixture, plateau_integral, plateau_pushforward_cdf)


# ---------------------------------------------------------------- 1-D tails

def test_gaussian_tail_value():
    assert gaussian_log_tail(6.0) == pytest.approx(-20.74, abs=0.005)
    assert gaussian_log_tail(0.0) == pytest.approx(math.log(0.5), abs=1e-15)


def test_cauchy_tail_value():
    assert cauchy_log_tail(100.0) == pytest.approx(-5.75, abs=0.005)
    assert cauchy_log_tail(0.0) == pytest.approx(math.log(0.5), abs=1e-15)


@given(t=st.floats(-8, 8))
def test_cauchy_latent_map_is_inverse_cdf(t):
    with mpmath.workdps(40):
        ref = float(mpmath.tan(mpmath.pi * (mpmath.ncdf(t) - mpmath.mpf(1) / 2)))
    assert cauchy_from_latent(t) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_cauchy_latent_map_is_increasing():
    ts = np.linspace(-9, 9, 2001)
    xs = np.array([cauchy_from_latent(t) for t in ts])
    assert np.all(np.diff(xs) > 0)


# ------------------------------------------------------------ double well

def test_double_well_wells():
    assert DoubleWellSpec().wells == (-2.0, 2.0)


def test_noise_free_path_at_the_well_bottom_is_constant():
    spec = DoubleWellSpec(sigma=0.0)
    path = simulate_double_well(spec, np.zeros(spec.n_steps))
    assert np.all(path == 2.0)


@given(x0=st.floats(0.5, 3.5))
def test_noise_free_path_stays_in_right_well(x0):
    spec = DoubleWellSpec(sigma=0.0, x0=x0)
    z = np.random.default_rng(0).standard_normal(spec.n_steps)  # ignored at sigma = 0
    path = simulate_double_well(spec, z)
    # gradient flow towards +2 is monotone, so the minimum is min(x0, 2)
    assert path.min() >= min(x0, 2.0) - 1e-12
    assert -path_minimum(spec, z) < 1.5


def test_double_well_shape_and_blow_up_checks():
    spec = DoubleWellSpec()
    with pytest.raises(ValueError):
        simulate_double_well(spec, np.zeros(10))
    bad = DoubleWellSpec(dt=1.0, T=50.0, x0=10.0)
    with pytest.raises(FloatingPointError):
        simulate_double_well(bad, np.zeros(bad.n_steps))


def test_double_well_surrogate_is_negated_minimum():
    prob = double_well_problem()
    z = np.random.default_rng(1).standard_normal(1000)
    path = simulate_double_well(DoubleWellSpec(), z)
    assert prob.surrogate(z) == -path.min()


# ------------------------------------------------------------------- beam

def test_beam_no_inclusions():
    spec = BeamSpec()
    assert beam_deflection(spec, []) == pytest.approx(-0.41667, abs=5e-6)
    assert beam_deflection(spec, []) == pytest.approx(-0.01 * 125 / 3, rel=1e-14)


def test_beam_one_inclusion_at_root():
    assert beam_deflection(BeamSpec(), [0.0]) == pytest.approx(-0.41667 - 0.01 * 0.05 * 5 * 5, abs=5e-6)


def test_beam_truncation_mass():
    assert truncation_mass(BeamSpec()) == pytest.approx(8.11e-8, rel=0.01)


def test_beam_mean_inclusion_count():
    rng = np.random.default_rng(3)
    counts = [len(beam_prior_sample(BeamSpec(), rng)) for _ in range(100_000)]
    assert abs(np.mean(counts) - 5) < 3 * math.sqrt(5) / math.sqrt(100_000)


def test_beam_zero_increment_corner():
    t = times_from_latent(BeamSpec(), np.full(20, -30.0))
    assert len(t) == 20 and t[-1] < 1e-100


@given(times=st.lists(st.floats(0, 5), max_size=19), extra=st.floats(0, 6),
       w=st.floats(0, 1))
def test_beam_adding_an_inclusion_never_raises_deflection(times, extra, w):
    spec = BeamSpec(w=w)
    assert beam_deflection(spec, times + [extra]) <= beam_deflection(spec, times)


def test_beam_surrogate_matches_closed_form():
    prob = get_problem("beam")
    spec = BeamSpec()
    rng = np.random.default_rng(4)
    for z in rng.standard_normal((50, 20)):
        assert prob.surrogate(z) == pytest.approx(-beam_deflection(spec, times_from_latent(spec, z)),
                                                  rel=1e-13)


# -------------------------------------------------------------- labyrinth

def bfs_oracle(spec):
    """All-pairs shortest paths on the open-cell graph, read off at the goal."""
    n_r, n_c = spec.shape
    rows, cols = [], []
    for r in range(n_r):
        for c in range(n_c):
            if spec.walls[r, c]:
                continue
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr < n_r and cc < n_c and not spec.walls[rr, cc]:
                    rows.append(r * n_c + c)
                    cols.append(rr * n_c + cc)
    adj = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_r * n_c,) * 2)
    d = csgraph.shortest_path(adj, directed=False, unweighted=True,
                              indices=spec.goal[0] * n_c + spec.goal[1])
    return d.reshape(spec.shape)


@pytest.mark.parametrize("spec", [load_map("maze12"), open_grid(6, 40)], ids=["maze12", "open6"])
def test_goal_distance_matches_graph_oracle(spec):
    d = goal_distance(spec)
    ref = bfs_oracle(spec)
    reach = np.isfinite(ref)
    assert np.array_equal(d[reach], ref[reach].astype(int))
    assert np.all(d[~reach] == -1)
    assert d[spec.goal] == 0 and d[spec.start] > 0


def test_maze12_asset():
    spec = load_map("maze12")
    assert spec.shape == (12, 12) and spec.start == (0, 0) and spec.goal == (11, 11)
    assert parse_map(spec.to_ascii()).to_ascii() == spec.to_ascii()


@pytest.mark.parametrize("text", ["", "S.\n.", "..\n..", "S#\n#G", "S.#\n.##\n##G", "S.x\n..G"])
def test_bad_maps_rejected(text):
    with pytest.raises(GridError):
        parse_map(text)


def test_walks_take_admissible_steps():
    spec = load_map("maze12", K=100)
    rng = np.random.default_rng(5)
    for _ in range(200):
        cells = walk_cells(spec, labyrinth_walk(spec, rng))
        assert tuple(cells[0]) == spec.start
        assert np.all(np.abs(np.diff(cells, axis=0)).sum(axis=1) == 1)
        assert not spec.walls[cells[:, 0], cells[:, 1]].any()


def test_walk_moves_are_uniform_over_admissible():
    spec = open_grid(6, 2)
    rng = np.random.default_rng(6)
    walks = np.array([labyrinth_walk(spec, rng) for _ in range(12_000)])
    first = np.bincount(walks[:, 1], minlength=36)[[1, 6]]  # east or south from the corner
    assert stats.chisquare(first).pvalue > 0.01
    # from (0, 1) three moves are admissible
    second = walks[walks[:, 1] == 1, 2]
    assert stats.chisquare(np.bincount(second, minlength=36)[[0, 2, 7]]).pvalue > 0.01


def test_visiting_goal_fires_event():
    spec = open_grid(3, 4)
    walk = np.array([0, 1, 2, 5, 8])  # along the top row and down the right column
    assert labyrinth_surrogate(spec, walk) == 0.0
    prob = get_problem("labyrinth", size=3, K=4)
    assert prob.event(walk)
    assert not prob.event(np.array([0, 1, 0, 1, 0]))


# --------------------------------------------------------- plateau fixtures

def test_plateau_integrals():
    assert plateau_integral(0.3, "min_plateau") == pytest.approx(0.545, abs=1e-15)
    assert plateau_integral(0.3, "max_plateau") == pytest.approx(0.65, abs=1e-15)
    for loc in ("min_plateau", "max_plateau"):
        assert plateau_fixture(0.3, loc).exact["g"] == plateau_integral(0.3, loc)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
def test_plateau_parameter_errors(delta):
    with pytest.raises(ParameterError):
        plateau_fixture(delta)
    with pytest.raises(ParameterError):
        plateau_fixture(0.3, "middle")


@pytest.mark.parametrize("loc", ["min_plateau", "max_plateau"])
@pytest.mark.parametrize("delta", [0.1, 0.3, 0.5])
def test_plateau_pushforward_law(loc, delta):
    prob = plateau_fixture(delta, loc)
    _, g = prob.prior_batch(np.random.default_rng(7), 100_000)
    # the atom sits at a mass computed two ways; compare on a 1e-12 grid
    x = np.sort(np.round(np.exp([prob.log_survival(v) for v in g]), 12))
    n = len(x)
    uniq, last = np.unique(x, return_index=False, return_counts=True)
    emp = np.cumsum(last) / n
    theo = np.array([plateau_pushforward_cdf(delta, loc, round(a, 12)) for a in uniq])
    # sup over right limits at the jumps and left limits just before them
    left_emp = np.concatenate([[0.0], emp[:-1]])
    left_theo = np.array([plateau_pushforward_cdf(delta, loc, round(a, 12) - 1e-13) for a in uniq])
    d = max(np.abs(emp - theo).max(), np.abs(left_emp - left_theo).max())
    assert d < 1.628 / math.sqrt(n)


# ------------------------------------------------- cross-problem properties

PROBLEMS = {
    "gaussian": {}, "cauchy": {}, "uniform": {}, "plateau": {}, "double_well": {},
    "beam": {}, "labyrinth": {"size": 6, "K": 40},
}


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_surrogate_event_consistency(name):
    prob = get_problem(name, **PROBLEMS[name])
    pos, lv = prob.prior_batch(np.random.default_rng(8), 100_000)
    sub = range(0, 100_000, 100)
    scalar = np.array([prob.surrogate(pos[i]) for i in sub])
    assert np.allclose(scalar, lv[list(sub)], rtol=1e-12, atol=0)
    events = np.array([prob.event(pos[i]) for i in range(len(pos))])
    assert np.array_equal(events, lv > prob.event_threshold)


def test_registry():
    assert set(REGISTRY) == set(PROBLEMS)
    with pytest.raises(UnknownProblem):
        get_problem("nope")
    with pytest.raises(ParameterError):
        get_problem("gaussian", sigma=2.0)
    assert problem_parameters("gaussian") == {"a": 6.0}


def test_transform_keeps_dead_positions():
    prob = plateau_fixture(0.3, "min_plateau")
    moved = transform_surrogate(prob, lambda g: 2 * g + 1, lambda lv: (lv - 1) / 2)
    cfg = EngineConfig(J=20, N=300, seed=2)
    a, b = run(prob, cfg), run(moved, cfg)
    assert all(np.array_equal(p.position, q.position) for p, q in zip(a.dead, b.dead))
    assert [d.tie_group for d in a.dead] == [d.tie_group for d in b.dead]
    assert moved.exact == prob.exact and moved.event_threshold == 2.0


def test_oracle_matches_closed_form():
    est = monte_carlo_oracle(get_problem("gaussian", a=2.0), 1_000_000, seed=1)
    exact = stats.norm.sf(2.0)
    assert abs(est.p - exact) < 3 * est.se
    assert est.ci_low < exact < est.ci_high


def test_oracle_zero_hits_reports_bound():
    est = monte_carlo_oracle(get_problem("gaussian", a=10.0), 1000, seed=1)
    assert est.upper_bound_only and est.hits == 0 and est.ci_high == 3 / 1000
    assert est.log_p == -math.inf
