import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import task_sets
from cpgedf.generator import fuzz_taskset
from cpgedf.model import DagTask, TaskSet
from cpgedf.sim import (ReleasePattern, ScheduleTrace, SimulationError, default_horizon,
                        priority_key, simulate)
from cpgedf.sim.kernels import run_cpgedf


def reference_schedule(ts, releases, horizon):
    """Tick-by-tick CP-GEDF written for clarity rather than speed.

    Returns rows of per-processor ``(task, subtask, job)`` or ``None``.
    """
    m = ts.processors
    state = {}
    for task in ts:
        for j, r in enumerate(releases[task.id], start=1):
            state[task.id, j] = {"r": r, "left": dict(task.wcet_by_index), "fin": {}}
    rows, prev = [], [None] * m
    for t in range(horizon):
        ready = []
        for task in ts:
            jobs = [(j, s) for (tid, j), s in sorted(state.items()) if tid == task.id]
            live = next(((j, s) for j, s in jobs if any(s["left"].values())), None)
            if live is None or live[1]["r"] > t:
                continue
            j, s = live
            # the previous dag-job must be done, which holds since live is the first unfinished
            for v in task.indices:
                preds = task.predecessors[v]
                if s["left"][v] > 0 and all(s["fin"].get(p, t + 1) <= t for p in preds):
                    key = (s["r"] + task.period, task.id, v in task.cp_members, v)
                    ready.append((key, (task.id, v, j)))
        run = [x for _, x in sorted(ready)[:m]]
        row = [p if p in run else None for p in prev]
        for x in run:
            if x not in row:
                row[row.index(None)] = x
        for tid, v, j in run:
            s = state[tid, j]
            s["left"][v] -= 1
            if s["left"][v] == 0:
                s["fin"][v] = t + 1
        rows.append(row)
        prev = row
    return rows


def trace_rows(trace):
    tids = [t.id for t in trace.taskset]
    out = []
    for row in trace.assign:
        cells = []
        for x in row:
            if x < 0:
                cells.append(None)
            else:
                k = trace.inst_job[x]
                cells.append((tids[trace.job_task[k]], int(trace.inst_subtask[x]),
                              int(trace.job_index[k])))
        out.append(cells)
    return out


def test_priority_key_orders_deadline_then_task_then_cp_last():
    t1 = DagTask.from_wcets(1, [5, 1, 1, 5], [(1, 2), (1, 3), (1, 4)], 40)
    t2 = DagTask.from_wcets(2, [5], (), 50)
    assert t1.critical_path.subtask_indices == (1, 4)
    assert max(priority_key(t1, v, 0) for v in t1.indices) < priority_key(t2, 1, 0)
    assert priority_key(t1, 2, 0) < priority_key(t1, 4, 0)     # non-cp before cp
    assert priority_key(t1, 2, 0) < priority_key(t1, 3, 0)     # index order
    same_deadline = DagTask.from_wcets(3, [1], (), 40)
    assert priority_key(t1, 4, 0) < priority_key(same_deadline, 1, 0)


def test_cp_subjob_preempted_by_siblings(lazy_preempt):
    assert lazy_preempt.critical_path.subtask_indices == (1, 5, 6)
    tr = simulate(TaskSet([lazy_preempt], 2), horizon=50)
    runs = {v: tr.executions(1, v) for v in lazy_preempt.indices}
    assert runs == {1: [(0, 10)], 2: [(10, 15)], 3: [(15, 20)], 4: [(15, 20)],
                    5: [(10, 15), (20, 30)], 6: [(30, 40)]}
    assert tr.completions()[0] == (1, 1, 0, 40)


def test_uncontended_single_subtask_repeats():
    tr = simulate(TaskSet([DagTask.from_wcets(1, [3], (), 10)], 1), horizon=30)
    assert [tuple(x) for x in tr.executions(1, 1, 1)] == [(0, 3)]
    busy = (tr.assign[:, 0] >= 0).nonzero()[0].tolist()
    assert busy == [0, 1, 2, 10, 11, 12, 20, 21, 22]


def test_busy_pair_schedule(busy_pair):
    tr = simulate(busy_pair, ReleasePattern.explicit({1: [0], 2: [0]}), horizon=60)
    assert tr.completions() == [(1, 1, 0, 30), (2, 1, 0, 50)]


@settings(max_examples=60)
@given(task_sets(max_tasks=4, max_m=4, max_nodes=6, max_wcet=5), st.integers(0, 1000))
def test_matches_reference_scheduler(ts, seed):
    pattern = ReleasePattern("jitter", seed, 4)
    horizon = 120
    tr = simulate(ts, pattern, horizon=horizon)
    releases = {t.id: pattern.release_times(t, horizon) for t in ts}
    assert trace_rows(tr) == reference_schedule(ts, releases, horizon)


@pytest.mark.parametrize("seed", range(30))
def test_compiled_and_interpreted_agree(seed):
    ts = fuzz_taskset(seed)
    for pattern in (ReleasePattern(), ReleasePattern("jitter", seed, 7)):
        a = simulate(ts, pattern)
        b = simulate(ts, pattern, kernel=run_cpgedf.py_func)
        assert np.array_equal(a.assign, b.assign)


def test_misses_do_not_stop_the_run():
    ts = TaskSet([DagTask.from_wcets(i, [8], (), 10) for i in (1, 2)], 1)
    tr = simulate(ts, horizon=40)
    assert tr.first_miss == 10
    assert (tr.assign[:, 0] >= 0).all()
    assert len(tr.misses) >= 3


def test_later_dag_job_waits_for_previous():
    ts = TaskSet([DagTask.from_wcets(1, [8], (), 10),
                  DagTask.from_wcets(2, [8], (), 10)], 1)
    tr = simulate(ts, horizon=30)
    first, second = tr.job_row(2, 1), tr.job_row(2, 2)
    assert tr.job_completion[first] == 16
    assert tr.job_release[second] == 10
    assert tr.job_activation[second] == 16
    assert tr.start[tr.job_insts(second)[0]] >= 16


def test_jitter_releases():
    t = DagTask.from_wcets(1, [1], (), 10)
    rel = ReleasePattern.parse("jitter:5:7").release_times(t, 1000)
    assert 0 <= rel[0] <= 7
    gaps = np.diff(rel)
    assert gaps.min() >= 10 and gaps.max() <= 17
    assert rel == ReleasePattern("jitter", 5, 7).release_times(t, 1000)


def test_pattern_parsing():
    assert ReleasePattern.parse("sync") == ReleasePattern()
    with pytest.raises(ValueError):
        ReleasePattern.parse("jitter:1")
    with pytest.raises(SimulationError):
        ReleasePattern.explicit({1: [0, 5]}).release_times(
            DagTask.from_wcets(1, [1], (), 10), 20)


def test_default_horizon_and_cap():
    ts = TaskSet([DagTask.from_wcets(1, [1], (), 6), DagTask.from_wcets(2, [1], (), 4)], 1)
    assert default_horizon(ts) == (24, False)
    big = TaskSet([DagTask.from_wcets(1, [1], (), 9_999_991),
                   DagTask.from_wcets(2, [1], (), 9_999_973)], 1)
    assert default_horizon(big) == (10_000_000, True)


def test_horizon_overflow_is_a_fault():
    ts = TaskSet([DagTask.from_wcets(1, [1], (), 10)], 1)
    with pytest.raises(SimulationError):
        simulate(ts, horizon=2**31)
    with pytest.raises(SimulationError):
        simulate(ts, horizon=0)


def test_trace_export_is_deterministic(tmp_path, lazy_preempt):
    ts = TaskSet([lazy_preempt], 2)
    pattern = ReleasePattern("jitter", 3, 5)
    simulate(ts, pattern, horizon=100).to_jsonl(tmp_path / "a.jsonl")
    simulate(ts, pattern, horizon=100).to_jsonl(tmp_path / "b.jsonl")
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes()
    lines = a.decode().splitlines()
    head = json.loads(lines[0])["header"]
    assert head["pattern"] == "jitter:3:5" and head["horizon"] == 100 and head["seed"] == 3
    assert len(lines) == 101
    rec = json.loads(lines[1])
    assert rec["t"] == 0 and len(rec["procs"]) == 2


def test_from_assignment_round_trips(lazy_preempt):
    ts = TaskSet([lazy_preempt], 2)
    tr = simulate(ts, horizon=50)
    rebuilt = ScheduleTrace.from_assignment(ts, trace_rows(tr), {1: [0]})
    assert np.array_equal(rebuilt.assign, tr.assign)
    assert rebuilt.completions() == tr.completions()


@settings(max_examples=40)
@given(task_sets(max_tasks=4, max_m=4, max_nodes=6))
def test_executed_ticks_match_wcet(ts):
    tr = simulate(ts, horizon=300)
    done = tr.finish >= 0
    assert (tr.exec_count[done] == tr.inst_wcet[done]).all()
    assert (tr.exec_count <= tr.inst_wcet).all()


def test_env_flag_selects_interpreted_kernel(tmp_path):
    code = ("import numba, numpy as np\n"
            "from cpgedf._jit import NUMBA_ENABLED\n"
            "from cpgedf.sim.kernels import run_cpgedf\n"
            "from cpgedf.sim import simulate\n"
            "from cpgedf.generator import fuzz_taskset\n"
            "assert not NUMBA_ENABLED\n"
            "assert not isinstance(run_cpgedf, numba.core.dispatcher.Dispatcher)\n"
            "np.save('out.npy', simulate(fuzz_taskset(4)).assign)\n")
    env = dict(os.environ, CPGEDF_DISABLE_NUMBA="1")
    subprocess.run([sys.executable, "-c", code], check=True, cwd=tmp_path, env=env)
    interpreted = np.load(tmp_path / "out.npy")
    assert np.array_equal(interpreted, simulate(fuzz_taskset(4)).assign)
