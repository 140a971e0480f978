"""Heuristic portfolio and the exact dynamic-programming baseline."""
import itertools
import math
import sys

import numpy as np
import pytest

from tspsel.errors import (
    ConfigError,
    DomainError,
    InvalidTourError,
    ParameterError,
    SizeError,
)
from tspsel.instances import GenSpec, generate
from tspsel.rng import child_rng
from tspsel.solvers import (
    EXACT_DP_MAX_N,
    Budget,
    SolverSpec,
    default_portfolio,
    distance_matrix,
    exact_dp,
    solve,
    tour_length,
)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def brute_force(pts):
    n = len(pts)
    return min(
        tour_length(pts, (0,) + perm) for perm in itertools.permutations(range(1, n))
    )


# --- geometry ------------------------------------------------------------------


def test_distance_matrix_symmetric_zero_diagonal():
    pts = child_rng(50).random((12, 2))
    d = distance_matrix(pts)
    np.testing.assert_array_equal(d, d.T)
    np.testing.assert_array_equal(np.diag(d), np.zeros(12))
    assert d[0, 1] == np.hypot(*(pts[0] - pts[1]))


def test_tour_length_square():
    assert tour_length(UNIT_SQUARE, [0, 1, 2, 3]) == 4.0
    # the crossing order pays the two diagonals
    assert tour_length(UNIT_SQUARE, [0, 2, 1, 3]) == pytest.approx(2.0 + 2.0 * math.sqrt(2.0))


def test_tour_length_invariant_under_rotation_and_reversal():
    pts = child_rng(51).random((9, 2))
    base = list(range(9))
    ref = tour_length(pts, base)
    rotated = base[3:] + base[:3]
    reversed_ = base[::-1]
    assert tour_length(pts, rotated) == ref
    assert tour_length(pts, reversed_) == ref


def test_tour_length_rejects_non_permutations():
    for bad in ([0, 1, 2], [0, 1, 2, 2], [0, 1, 2, 4]):
        with pytest.raises(InvalidTourError):
            tour_length(UNIT_SQUARE, bad)


def test_points_validation():
    with pytest.raises(DomainError):
        tour_length(np.array([[0.0, 0.0], [1.0, 1.0]]), [0, 1])
    with pytest.raises(DomainError):
        tour_length(np.array([[0.0, 0.0], [np.inf, 1.0], [1.0, 1.0]]), [0, 1, 2])


# --- exact baseline ---------------------------------------------------------------


def test_exact_dp_square():
    length, tour = exact_dp(UNIT_SQUARE)
    assert length == 4.0
    assert sorted(tour) == [0, 1, 2, 3]
    assert tour_length(UNIT_SQUARE, tour) == 4.0


@pytest.mark.parametrize("n,seed", [(5, 0), (6, 1), (7, 2), (8, 3)])
def test_exact_dp_matches_brute_force(n, seed):
    pts = child_rng(52, n, seed).random((n, 2))
    length, tour = exact_dp(pts)
    assert length == pytest.approx(brute_force(pts), abs=1e-12)
    assert length == pytest.approx(tour_length(pts, tour), abs=1e-12)


def test_exact_dp_frozen_value():
    pts = np.random.default_rng(42).random((8, 2))
    length, _ = exact_dp(pts)
    assert length == pytest.approx(2.4048571327254735, abs=1e-12)


def test_exact_dp_size_limit():
    pts = child_rng(53).random((EXACT_DP_MAX_N + 1, 2))
    with pytest.raises(SizeError):
        exact_dp(pts)
    exact_dp(child_rng(54).random((EXACT_DP_MAX_N, 2)))  # boundary fits


# --- budget and spec validation ------------------------------------------------------


def test_budget_validation():
    Budget(cutoff_s=1.0, target_length=0.0).validate()
    with pytest.raises(ParameterError):
        Budget(cutoff_s=-1.0, target_length=0.0).validate()
    with pytest.raises(ParameterError):
        Budget(cutoff_s=math.inf, target_length=0.0).validate()
    with pytest.raises(ParameterError):
        Budget(cutoff_s=1.0, target_length=-2.0).validate()
    with pytest.raises(ParameterError):
        Budget(cutoff_s=1.0, target_length=0.0, cost_rate=0.0).validate()


def test_solver_spec_validation():
    with pytest.raises(ConfigError):
        SolverSpec("x", "simulated-human").validate()
    with pytest.raises(ConfigError):
        SolverSpec("x", "external").validate()
    SolverSpec("x", "external", {"command": "run {instance_path}"}).validate()


def test_default_portfolio_composition():
    ids = [s.id for s in default_portfolio()]
    assert ids == sorted(ids)
    assert ids == ["anneal", "greedy_oropt", "nn2opt", "rr2opt"]
    for s in default_portfolio():
        s.validate()


# --- solve() semantics ----------------------------------------------------------------


def run_square(kind, cutoff=0.01, target=4.0, seed=0):
    return solve(UNIT_SQUARE, SolverSpec(kind, kind), Budget(cutoff, target), seed)


@pytest.mark.parametrize("kind", ["anneal", "greedy_oropt", "nn2opt", "rr2opt"])
def test_crossing_square_resolves_exactly(kind):
    out = run_square(kind)
    assert out.success
    assert out.best_length == 4.0
    assert tour_length(UNIT_SQUARE, out.best_tour) == 4.0


def test_success_time_is_evals_over_rate():
    out = run_square("nn2opt")
    assert out.success
    assert out.time_s == out.evaluations / 1e6
    assert out.time_s <= 0.01


def test_failure_time_is_cutoff_exactly():
    # unreachable target: every run must charge the whole budget
    out = solve(UNIT_SQUARE, SolverSpec("nn2opt", "nn2opt"), Budget(0.003, 0.0), 1)
    assert not out.success
    assert out.time_s == 0.003
    assert out.evaluations == int(0.003 * 1e6)
    assert out.best_length == 4.0  # still reports the best tour found


def test_zero_budget_fails_cleanly():
    out = solve(UNIT_SQUARE, SolverSpec("nn2opt", "nn2opt"), Budget(0.0, 0.0), 0)
    assert not out.success
    assert out.time_s == 0.0
    assert out.evaluations == 0
    assert sorted(out.best_tour) == [0, 1, 2, 3]


@pytest.mark.parametrize("kind", ["anneal", "greedy_oropt", "nn2opt", "rr2opt"])
def test_solver_deterministic_in_seed(kind):
    inst = generate(GenSpec("rue", 1, 30, 30, seed=55))[0]
    budget = Budget(0.01, 0.0)
    a = solve(inst, SolverSpec(kind, kind), budget, seed=9)
    b = solve(inst, SolverSpec(kind, kind), budget, seed=9)
    assert (a.best_length, a.evaluations, a.time_s) == (b.best_length, b.evaluations, b.time_s)
    assert a.best_tour == b.best_tour


def test_different_seeds_generally_differ():
    inst = generate(GenSpec("rue", 1, 40, 40, seed=56))[0]
    budget = Budget(0.002, 0.0)
    lengths = {
        solve(inst, SolverSpec("rr2opt", "rr2opt"), budget, seed=s).best_length
        for s in range(6)
    }
    assert len(lengths) > 1


@pytest.mark.parametrize("kind", ["anneal", "greedy_oropt", "nn2opt", "rr2opt"])
def test_heuristics_never_beat_exact(kind):
    rng = child_rng(57)
    for trial in range(6):
        n = int(rng.integers(6, 13))
        pts = rng.random((n, 2))
        optimum, _ = exact_dp(pts)
        out = solve(pts, SolverSpec(kind, kind), Budget(0.01, 0.0), seed=trial)
        assert out.best_length >= optimum - 1e-9
        assert tour_length(pts, out.best_tour) == out.best_length


def test_heuristic_finds_optimum_with_budget():
    rng = child_rng(58)
    hits = 0
    for trial in range(10):
        pts = rng.random((10, 2))
        optimum, _ = exact_dp(pts)
        out = solve(
            pts,
            SolverSpec("nn2opt", "nn2opt"),
            Budget(0.05, optimum * (1.0 + 1e-9)),
            seed=trial,
        )
        hits += out.success
    assert hits >= 8


def test_wallclock_mode_smoke():
    inst = generate(GenSpec("rue", 1, 50, 50, seed=59))[0]
    budget = Budget(0.05, 0.0, wallclock=True)
    out = solve(inst, SolverSpec("nn2opt", "nn2opt"), budget, seed=0)
    assert not out.success
    assert out.time_s == 0.05
    assert out.evaluations > 0


def test_unknown_params_are_ignored_but_typed_params_apply():
    # n and budget sized so the search passes several local optima, where
    # the restart policy is the only difference
    inst = generate(GenSpec("rue", 1, 12, 12, seed=60))[0]
    base = solve(inst, SolverSpec("rr2opt", "rr2opt"), Budget(0.02, 0.0), seed=0)
    full = solve(
        inst,
        SolverSpec("rr", "rr2opt", {"restart": "full"}),
        Budget(0.02, 0.0),
        seed=0,
    )
    # full restarts revisit construction; the search trace must diverge
    assert base.best_tour != full.best_tour or base.best_length != full.best_length


# --- external adapter -------------------------------------------------------------------


ECHO_SOLVER = (
    "{py} -c \"import sys;"
    "lines=[l.split() for l in open(sys.argv[1]) if l[0].isdigit()];"
    "print('TOUR: ' + ' '.join(str(i + 1) for i in range(len(lines))))\" {path}"
)


def test_external_solver_roundtrip():
    spec = SolverSpec(
        "ext",
        "external",
        {"command": ECHO_SOLVER.format(py=sys.executable, path="{instance_path}")},
    )
    out = solve(UNIT_SQUARE, spec, Budget(5.0, 10.0, wallclock=True), seed=0)
    assert out.success
    assert out.best_tour == [0, 1, 2, 3]
    assert out.best_length == 4.0


def test_external_solver_garbage_fails_closed():
    spec = SolverSpec("ext", "external", {"command": f"{sys.executable} -c \"print('junk')\""})
    out = solve(UNIT_SQUARE, spec, Budget(5.0, 0.0, wallclock=True), seed=0)
    assert not out.success
    assert out.time_s == 5.0
    assert sorted(out.best_tour) == [0, 1, 2, 3]


def test_external_solver_missing_binary_fails_closed():
    spec = SolverSpec("ext", "external", {"command": "/nonexistent/solver {instance_path}"})
    out = solve(UNIT_SQUARE, spec, Budget(1.0, 0.0, wallclock=True), seed=0)
    assert not out.success
