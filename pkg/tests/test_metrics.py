"""Penalized-runtime scoring against exhaustive reference implementations."""
import numpy as np
import pytest

from tspsel.errors import DomainError
from tspsel.metrics import (
    EvalReport,
    evaluate_selector,
    family_stats,
    format_eval_report,
    format_stats_table,
    par10,
    sbs,
    vbs,
)
from tspsel.rng import child_rng
from tspsel.runner import RunTable


def make_table(t, success=None, cutoff=1.0, families=None, penalty=10.0):
    t = np.asarray(t, dtype=float)
    n, m = t.shape
    if success is None:
        success = t < cutoff * penalty
    return RunTable(
        instance_ids=[f"i{k:03d}" for k in range(n)],
        families=list(families) if families is not None else ["f"] * n,
        solver_ids=[f"s{j}" for j in range(m)],
        t=t,
        success=np.asarray(success, dtype=bool),
        cutoff_s=cutoff,
        penalty_factor=penalty,
    )


def random_table(rng, n, m, cutoff=1.0):
    fail = rng.random((n, m)) < 0.3
    t = np.where(fail, cutoff * 10.0, rng.random((n, m)) * cutoff)
    return make_table(t, success=~fail, cutoff=cutoff)


# --- reference implementations (plain loops, no shortcuts) --------------------


def ref_vbs(t):
    total = 0.0
    choices = []
    for row in t:
        best_j = 0
        for j in range(1, len(row)):
            if row[j] < row[best_j]:
                best_j = j
        choices.append(best_j)
        total += row[best_j]
    return total / len(t), choices


def ref_sbs(t):
    means = [sum(col) / len(col) for col in t.T]
    best = 0
    for j in range(1, len(means)):
        if means[j] < means[best]:
            best = j
    return best


def test_par10_penalty_charging():
    # one failure at cutoff 900 costs exactly 9000 in the average
    times = [100.0, 9000.0, 200.0]
    assert par10(times) == (100.0 + 9000.0 + 200.0) / 3.0


def test_par10_empty_rejected():
    with pytest.raises(DomainError):
        par10([])


def test_vbs_sbs_match_reference_on_random_tables():
    rng = child_rng(101, 0)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 5))
        table = random_table(rng, n, m)
        v, choices = vbs(table)
        rv, rchoices = ref_vbs(table.t)
        assert abs(v - rv) < 1e-12
        assert list(choices) == rchoices
        assert sbs(table) == ref_sbs(table.t)


def test_vbs_tie_takes_lowest_index():
    table = make_table([[0.5, 0.5, 0.7], [0.2, 0.1, 0.1]])
    _, choices = vbs(table)
    assert list(choices) == [0, 1]


def test_sbs_tie_takes_lowest_index():
    assert sbs(make_table([[1.0, 1.0], [2.0, 2.0]])) == 0


def test_vbs_never_above_any_column():
    rng = child_rng(102, 0)
    for _ in range(50):
        table = random_table(rng, int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        v, _ = vbs(table)
        for j in range(len(table.solver_ids)):
            assert v <= np.mean(table.t[:, j]) + 1e-15


# --- family statistics ---------------------------------------------------------


def test_family_stats_counts():
    t = [
        [1.0, 2.0],  # fam a, unique winner s0
        [3.0, 3.0],  # fam a, shared
        [5.0, 1.0],  # fam b, unique winner s1
        [10.0, 4.0],  # fam b, unique winner s1
    ]
    success = [[True, True], [True, False], [False, True], [True, True]]
    table = make_table(t, success=success, families=["a", "a", "b", "b"])
    stats = family_stats(table)
    assert [s.family for s in stats] == ["a", "b", "Total"]
    a, b, tot = stats
    assert (a.instances, a.unique, a.shared) == (2, 1, 1)
    assert (b.instances, b.unique, b.shared) == (2, 2, 0)
    assert (tot.instances, tot.unique, tot.shared) == (4, 3, 1)
    assert a.failed == (0, 1)
    assert b.failed == (1, 0)
    assert tot.failed == (1, 1)
    np.testing.assert_allclose(tot.par10, [4.75, 2.5])


def test_family_stats_tie_tolerance():
    table = make_table([[1.0, 1.05]])
    assert family_stats(table, tie_tol=0.0)[-1].unique == 1
    assert family_stats(table, tie_tol=0.1)[-1].shared == 1
    with pytest.raises(DomainError):
        family_stats(table, tie_tol=-0.1)


# --- selector evaluation --------------------------------------------------------


def known_table():
    # s1 is the single best solver (column means 4.0 vs 3.0 vs 4.33)
    t = [
        [1.0, 2.0, 3.0],
        [4.0, 3.0, 10.0],
        [7.0, 4.0, 0.1],
    ]
    success = [[True] * 3, [True] * 3, [True, True, True]]
    return make_table(t, success=success)


def test_evaluate_selector_known_case():
    table = known_table()
    assert sbs(table) == 1
    rep = evaluate_selector(table, [0, 1, 2])  # per-row best
    v, _ = vbs(table)
    assert rep.par10 == pytest.approx(v)
    assert rep.avg_rank == 1.0
    # row 1 ties the baseline, rows 0 and 2 beat it
    assert rep.impro_pct == pytest.approx(100.0 * 2 / 3)
    assert rep.notwo_pct == pytest.approx(100.0)
    assert rep.timeouts == 0


def test_evaluate_selector_baseline_copy_scores_zero():
    table = known_table()
    rep = evaluate_selector(table, [1, 1, 1])
    assert rep.impro_pct == 0.0
    assert rep.notwo_pct == 100.0
    assert rep.par10 == pytest.approx(3.0)


def test_evaluate_selector_competition_ranks():
    table = known_table()
    rep = evaluate_selector(table, [2, 2, 2])
    # per-row ranks of column 2: 3rd, 3rd, 1st
    assert rep.avg_rank == pytest.approx((3 + 3 + 1) / 3)


def test_evaluate_selector_overhead_additive_only():
    table = known_table()
    plain = evaluate_selector(table, [0, 1, 2])
    loaded = evaluate_selector(table, [0, 1, 2], overhead=[0.5, 0.5, 0.5])
    assert loaded.par10 == pytest.approx(plain.par10 + 0.5)
    # comparisons against the baseline ignore the overhead
    assert loaded.impro_pct == plain.impro_pct
    assert loaded.notwo_pct == plain.notwo_pct
    assert loaded.avg_rank == plain.avg_rank


def test_evaluate_selector_counts_timeouts():
    t = [[1.0, 10.0], [10.0, 1.0]]
    success = [[True, False], [False, True]]
    table = make_table(t, success=success)
    rep = evaluate_selector(table, [1, 0])
    assert rep.timeouts == 2


def test_evaluate_selector_input_validation():
    table = known_table()
    with pytest.raises(DomainError):
        evaluate_selector(table, [0, 1])
    with pytest.raises(DomainError):
        evaluate_selector(table, [0, 1, 3])
    with pytest.raises(DomainError):
        evaluate_selector(table, [0, 1, 2], overhead=[1.0])
    with pytest.raises(DomainError):
        evaluate_selector(table, [0, 1, 2], overhead=[-1.0, 0.0, 0.0])


def test_format_helpers_mention_key_numbers():
    table = known_table()
    text = format_stats_table(family_stats(table), table.solver_ids)
    assert "[Total]" in text and "unique=" in text and "PAR10" in text
    rep = EvalReport(par10=1.5, avg_rank=1.25, impro_pct=50.0, notwo_pct=75.0, timeouts=2)
    line = format_eval_report("cnn", rep)
    assert "PAR10=1.5000" in line and "timeouts=2" in line
