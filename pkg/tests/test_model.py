from fractions import Fraction

import pytest
from hypothesis import given

from conftest import brute_critical_path, dag_tasks, task_sets
from cpgedf.model import (DagTask, InvalidTaskError, Subtask, TaskSet, aggregates,
                          critical_path, cp_utilization, ensure_valid,
                          single_subtask_companion, validate, validate_taskset)


def test_chain_at_period_boundary_is_valid():
    assert validate(DagTask.from_wcets(1, [10, 10], [(1, 2)], 20)) == []


def test_chain_longer_than_period():
    assert validate(DagTask.from_wcets(1, [10, 15], [(1, 2)], 20)) == [
        "cp length 25 > period 20"]


def test_cycle_is_reported():
    bad = validate(DagTask.from_wcets(1, [1, 1], [(1, 2), (2, 1)], 10))
    assert any("cycle" in v for v in bad)


@pytest.mark.parametrize("task, fragment", [
    (DagTask.from_wcets(1, [1, 1], [(1, 1)], 10), "self-edge"),
    (DagTask.from_wcets(1, [1, 1], [(1, 2), (1, 2)], 10), "duplicate edge"),
    (DagTask.from_wcets(1, [1], [(1, 3)], 10), "unknown subtask"),
    (DagTask.from_wcets(1, [0], (), 10), "wcet"),
    (DagTask(1, (Subtask(1, 1), Subtask(1, 2)), (), 10), "duplicate subtask index"),
    (DagTask(1, (Subtask(1, 1),), (), 10, deadline=5), "deadline"),
    (DagTask(1, (), (), 10), "no subtasks"),
])
def test_structural_violations(task, fragment):
    assert any(fragment in v for v in validate(task))


def test_overload_reported_but_not_refused():
    ts = TaskSet([DagTask.from_wcets(i, [8], (), 10) for i in (1, 2)], 1)
    assert any(v.startswith("U_sum") for v in validate_taskset(ts))
    ensure_valid(ts)
    with pytest.raises(InvalidTaskError):
        ensure_valid(ts, allow_overload=False)


def test_fork_join_critical_path(fork_join):
    cp = critical_path(fork_join)
    assert cp.subtask_indices == (1, 2, 4)
    assert cp.length == 35
    assert cp_utilization(fork_join) == Fraction(7, 10)


def test_single_subtask_path():
    t = DagTask.from_wcets(1, [7], (), 10)
    assert critical_path(t) == ((1,), 7)
    assert t.cp_utilization == t.utilization


def test_diamond_tie_breaks_lexicographically():
    t = DagTask.from_wcets(1, [10, 5, 5, 10], [(1, 2), (1, 3), (2, 4), (3, 4)], 50)
    path, length = brute_critical_path(t)
    assert (path, length) == ((1, 2, 4), 25)
    assert critical_path(t) == (path, length)
    assert t.cp_utilization == Fraction(1, 2)


def test_multiple_sources_and_sinks():
    t = DagTask.from_wcets(1, [3, 9, 4, 1], [(1, 3), (2, 4)], 20)
    assert critical_path(t) == ((2, 4), 10)


def test_critical_path_rejects_cycle():
    with pytest.raises(InvalidTaskError):
        critical_path(DagTask.from_wcets(1, [1, 1], [(1, 2), (2, 1)], 10))


def test_aggregates_examples():
    assert aggregates(TaskSet((), 2)).total_utilization == 0
    one = TaskSet([DagTask.from_wcets(1, [7], (), 10)], 1)
    assert aggregates(one) == (Fraction(7, 10),) * 3
    # u = 1/2, sigma = 3/10  and  u = sigma = 1/4
    a = DagTask.from_wcets(1, [3, 2], (), 10)
    b = DagTask.from_wcets(2, [5], (), 20)
    agg = aggregates(TaskSet([a, b], 2))
    assert agg.total_utilization == Fraction(3, 4)
    assert agg.max_cp_utilization == Fraction(3, 10)
    assert agg.max_utilization == Fraction(1, 2)


def test_companion_keeps_wcet_and_period(fork_join):
    comp = single_subtask_companion(TaskSet([fork_join], 2))
    (t,) = comp.tasks
    assert (t.total_wcet, t.period, len(t.subtasks)) == (40, 50, 1)


@given(dag_tasks())
def test_dp_matches_exhaustive_enumeration(task):
    path, length = brute_critical_path(task)
    cp = critical_path(task)
    assert cp.length == length
    assert cp.subtask_indices == path


@given(dag_tasks())
def test_path_is_a_chain_of_edges(task):
    cp = task.critical_path
    edges = set(task.edges)
    assert all((a, b) in edges for a, b in zip(cp.subtask_indices, cp.subtask_indices[1:]))
    assert cp.length == sum(task.wcet_by_index[v] for v in cp.subtask_indices)


@given(dag_tasks())
def test_sigma_bounded_by_u_and_one(task):
    assert validate(task) == []
    assert task.cp_utilization <= task.utilization
    assert task.cp_utilization <= 1


@given(task_sets())
def test_aggregates_are_exact_sums(ts):
    agg = aggregates(ts)
    assert agg.total_utilization == sum((Fraction(t.total_wcet, t.period) for t in ts),
                                        Fraction(0))
    assert isinstance(agg.total_utilization, Fraction)
