"""CP-GEDF simulation on M identical processors and the resulting trace."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from pathlib import Path

import numpy as np

from ..io import taskset_hash
from ..model import DagTask, TaskSet, ensure_valid
from .kernels import run_cpgedf

HORIZON_CAP = 10_000_000
_MAX_TICK = 2**31 - 1


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class ReleasePattern:
    """When dag-jobs are released.

    ``sync``: every task releases at 0, p, 2p, ...
    ``jitter``: first release in [0, max_extra_delay], then gaps drawn
    uniformly from [p, p + max_extra_delay] with a seeded generator.
    ``explicit``: release times given per task id in ``releases``.
    """

    mode: str = "sync"
    seed: int = 0
    max_extra_delay: int = 0
    releases: tuple = ()

    def __post_init__(self):
        if self.mode not in ("sync", "jitter", "explicit"):
            raise ValueError("unknown release mode %r" % self.mode)
        if self.max_extra_delay < 0:
            raise ValueError("max_extra_delay must be >= 0")

    @classmethod
    def parse(cls, text):
        """``sync`` or ``jitter:SEED:MAX``."""
        if text == "sync":
            return cls()
        parts = text.split(":")
        if len(parts) == 3 and parts[0] == "jitter":
            return cls("jitter", int(parts[1]), int(parts[2]))
        raise ValueError("release pattern must be 'sync' or 'jitter:SEED:MAX'")

    @classmethod
    def explicit(cls, mapping):
        return cls("explicit",
                   releases=tuple((tid, tuple(rs)) for tid, rs in sorted(mapping.items())))

    def describe(self):
        if self.mode == "sync":
            return "sync"
        if self.mode == "jitter":
            return "jitter:%d:%d" % (self.seed, self.max_extra_delay)
        return "explicit"

    def release_times(self, task: DagTask, horizon):
        """Release instants of ``task`` strictly before ``horizon``."""
        p = task.period
        if self.mode == "sync":
            return list(range(0, horizon, p))
        if self.mode == "explicit":
            times = list(dict(self.releases).get(task.id, ()))
            for a, b in zip(times, times[1:]):
                if b - a < p:
                    raise SimulationError("releases of task %s closer than its period"
                                          % task.id)
            return [r for r in times if r < horizon]
        rng = np.random.default_rng([self.seed, task.id & 0xFFFFFFFF])
        out = []
        r = int(rng.integers(0, self.max_extra_delay + 1))
        while r < horizon:
            out.append(r)
            r += p + int(rng.integers(0, self.max_extra_delay + 1))
        return out


def default_horizon(ts: TaskSet, cap=HORIZON_CAP):
    """``2 * lcm(periods)`` capped at ``cap``; returns ``(horizon, capped)``."""
    if not ts.tasks:
        return 1, False
    h = 2 * reduce(math.lcm, (t.period for t in ts.tasks))
    return (cap, True) if h > cap else (h, False)


def priority_key(task: DagTask, subtask_index, release):
    """Scheduling order of a ready sub-job; smaller runs first.

    (absolute deadline, task id, critical-path member last, subtask index).
    """
    on_cp = 1 if subtask_index in task.cp_members else 0
    return (release + task.deadline, task.id, on_cp, subtask_index)


@dataclass(frozen=True, eq=False)
class ScheduleTrace:
    """Per-tick processor assignment plus the dag-job and sub-job tables.

    ``assign[t, p]`` is the sub-job (``inst``) that ran on processor ``p``
    during ``[t, t+1)``, or -1. Sub-jobs are laid out job-major: the sub-jobs
    of dag-job row ``k`` are ``job_sub_off[k]`` .. ``job_sub_off[k+1]-1`` in
    subtask-index order. Completion, readiness and miss logs are derived from
    ``assign`` alone, never from simulator state.
    """

    taskset: TaskSet
    horizon: int
    assign: np.ndarray
    job_task: np.ndarray       # task position in taskset.tasks
    job_index: np.ndarray      # 1-based j
    job_release: np.ndarray
    job_sub_off: np.ndarray
    pattern: ReleasePattern = field(default_factory=ReleasePattern)
    horizon_capped: bool = False

    @property
    def processors(self):
        return self.assign.shape[1]

    @cached_property
    def job_deadline(self):
        d = np.array([t.deadline for t in self.taskset.tasks], dtype=np.int64)
        return self.job_release + d[self.job_task]

    @cached_property
    def inst_job(self):
        sizes = np.diff(self.job_sub_off)
        return np.repeat(np.arange(len(sizes)), sizes)

    @cached_property
    def inst_subtask(self):
        """Subtask index (as in the task definition) of every sub-job."""
        out = np.empty(self.n_inst, dtype=np.int64)
        for k, i in enumerate(self.job_task):
            idx = self.taskset.tasks[i].indices
            out[self.job_sub_off[k]:self.job_sub_off[k + 1]] = sorted(idx)
        return out

    @cached_property
    def inst_wcet(self):
        out = np.empty(self.n_inst, dtype=np.int64)
        for k, i in enumerate(self.job_task):
            t = self.taskset.tasks[i]
            out[self.job_sub_off[k]:self.job_sub_off[k + 1]] = [
                t.wcet_by_index[x] for x in sorted(t.indices)]
        return out

    @cached_property
    def inst_on_cp(self):
        out = np.zeros(self.n_inst, dtype=bool)
        for k, i in enumerate(self.job_task):
            t = self.taskset.tasks[i]
            out[self.job_sub_off[k]:self.job_sub_off[k + 1]] = [
                x in t.cp_members for x in sorted(t.indices)]
        return out

    @property
    def n_inst(self):
        return int(self.job_sub_off[-1])

    @property
    def n_jobs(self):
        return len(self.job_task)

    @cached_property
    def _exec_stats(self):
        flat = self.assign.ravel()
        ticks = np.repeat(np.arange(self.horizon, dtype=np.int64), self.processors)
        run = flat >= 0
        ids, when = flat[run].astype(np.int64), ticks[run]
        count = np.bincount(ids, minlength=self.n_inst)
        first = np.full(self.n_inst, -1, dtype=np.int64)
        last = np.full(self.n_inst, -1, dtype=np.int64)
        if ids.size:
            first[:] = self.horizon
            np.minimum.at(first, ids, when)
            first[count == 0] = -1
            np.maximum.at(last, ids, when)
        return count, first, last

    @property
    def exec_count(self):
        return self._exec_stats[0]

    @property
    def start(self):
        """First tick each sub-job ran, -1 if never."""
        return self._exec_stats[1]

    @cached_property
    def finish(self):
        """Completion instant of each sub-job, -1 if unfinished by the horizon."""
        count, _, last = self._exec_stats
        return np.where(count >= self.inst_wcet, last + 1, -1)

    @cached_property
    def job_completion(self):
        if self.n_jobs == 0:
            return np.zeros(0, dtype=np.int64)
        starts = self.job_sub_off[:-1]
        done = np.minimum.reduceat(self.finish, starts) >= 0
        latest = np.maximum.reduceat(self.finish, starts)
        return np.where(done, latest, -1)

    @cached_property
    def job_activation(self):
        """Release, or completion of the previous dag-job of the task if later."""
        act = self.job_release.copy()
        comp = self.job_completion
        for k in range(1, self.n_jobs):
            if self.job_task[k] == self.job_task[k - 1]:
                prev = comp[k - 1]
                act[k] = -1 if prev < 0 else max(act[k], prev)
        return act

    @cached_property
    def ready(self):
        """Instant each sub-job became ready, -1 if never within the horizon."""
        out = np.full(self.n_inst, -1, dtype=np.int64)
        fin = self.finish
        act = self.job_activation
        for i, task in enumerate(self.taskset.tasks):
            rows = np.flatnonzero(self.job_task == i)
            if rows.size == 0:
                continue
            order = sorted(task.indices)
            col = {x: c for c, x in enumerate(order)}
            base = self.job_sub_off[rows][:, None] + np.arange(len(order))[None, :]
            f = fin[base]
            r = np.empty_like(f)
            for x in order:
                preds = task.predecessors[x]
                if not preds:
                    r[:, col[x]] = act[rows]
                    continue
                pf = f[:, [col[y] for y in preds]]
                r[:, col[x]] = np.where((pf >= 0).all(axis=1), pf.max(axis=1), -1)
            out[base] = r
        return out

    @cached_property
    def misses(self):
        """``(task_id, job_index, deadline)`` of every observed deadline miss."""
        comp = self.job_completion
        dl = self.job_deadline
        bad = (dl <= self.horizon) & ((comp < 0) | (comp > dl))
        return [(self.taskset.tasks[self.job_task[k]].id, int(self.job_index[k]),
                 int(dl[k])) for k in np.flatnonzero(bad)]

    @property
    def first_miss(self):
        """Earliest instant at which a deadline is missed, or None."""
        return min((d for _, _, d in self.misses), default=None)

    def job_row(self, task_id, job_index):
        pos = next((i for i, t in enumerate(self.taskset.tasks) if t.id == task_id), None)
        hit = np.flatnonzero((self.job_task == pos) & (self.job_index == job_index))
        if pos is None or hit.size == 0:
            raise KeyError("dag-job (%s, %s) not in trace" % (task_id, job_index))
        return int(hit[0])

    def job_insts(self, k):
        return np.arange(self.job_sub_off[k], self.job_sub_off[k + 1])

    def completions(self):
        """``(task_id, job_index, release, completion or None)`` per dag-job."""
        comp = self.job_completion
        return [(self.taskset.tasks[self.job_task[k]].id, int(self.job_index[k]),
                 int(self.job_release[k]), int(comp[k]) if comp[k] >= 0 else None)
                for k in range(self.n_jobs)]

    def executions(self, task_id, subtask_index, job_index=1):
        """Maximal ``[start, end)`` runs of one sub-job."""
        k = self.job_row(task_id, job_index)
        task = self.taskset.task(task_id)
        inst = self.job_sub_off[k] + sorted(task.indices).index(subtask_index)
        on = (self.assign == inst).any(axis=1)
        return runs(on)

    @classmethod
    def from_assignment(cls, ts, assign, releases, pattern=None):
        """Build a trace from a hand-made assignment.

        ``assign[t][p]`` is ``None`` or ``(task_id, subtask_index, job_index)``;
        ``releases`` maps task id -> list of release instants.
        """
        tables = _job_tables(ts, {t.id: list(releases.get(t.id, ())) for t in ts.tasks})
        job_task, job_index, job_release, job_sub_off = tables
        lookup = {}
        for k in range(len(job_task)):
            task = ts.tasks[job_task[k]]
            for c, x in enumerate(sorted(task.indices)):
                lookup[(task.id, x, int(job_index[k]))] = int(job_sub_off[k]) + c
        arr = np.full((len(assign), len(assign[0]) if assign else ts.processors),
                      -1, dtype=np.int32)
        for t, row in enumerate(assign):
            for p, cell in enumerate(row):
                if cell is not None:
                    arr[t, p] = lookup[tuple(cell)]
        return cls(ts, len(assign), arr, job_task, job_index, job_release,
                   job_sub_off, pattern or ReleasePattern.explicit(releases))

    def to_jsonl(self, path, seed=None):
        """One header line, then ``{"t", "procs"}`` per tick."""
        tids = np.array([t.id for t in self.taskset.tasks], dtype=np.int64)
        cell_task = tids[self.job_task[self.inst_job]] if self.n_inst else tids
        cell_sub = self.inst_subtask
        cell_job = self.job_index[self.inst_job]
        header = {
            "header": {
                "taskset_sha256": taskset_hash(self.taskset),
                "seed": self.pattern.seed if seed is None else seed,
                "pattern": self.pattern.describe(),
                "horizon": self.horizon,
                "horizon_capped": self.horizon_capped,
                "processors": self.processors,
            }
        }
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            for t in range(self.horizon):
                procs = []
                for x in self.assign[t]:
                    if x < 0:
                        procs.append(None)
                    else:
                        procs.append({"task": int(cell_task[x]), "sub": int(cell_sub[x]),
                                      "job": int(cell_job[x])})
                fh.write(json.dumps({"t": t, "procs": procs}) + "\n")


def runs(mask, offset=0):
    """Maximal ``(start, end)`` runs of True in a boolean vector."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return []
    edges = np.flatnonzero(np.diff(np.concatenate(([0], mask.view(np.int8), [0]))))
    return [(int(a) + offset, int(b) + offset) for a, b in zip(edges[::2], edges[1::2])]


def _job_tables(ts, releases):
    job_task, job_index, job_release, sizes = [], [], [], []
    for i, task in enumerate(ts.tasks):
        for j, r in enumerate(releases[task.id]):
            job_task.append(i)
            job_index.append(j + 1)
            job_release.append(r)
            sizes.append(len(task.subtasks))
    job_sub_off = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=job_sub_off[1:])
    return (np.array(job_task, dtype=np.int64), np.array(job_index, dtype=np.int64),
            np.array(job_release, dtype=np.int64), job_sub_off)


def _structure_arrays(ts):
    sub_off = [0]
    wcet, cp_flag, pred_cnt, succ_ptr, succ_idx = [], [], [], [0], []
    for task in ts.tasks:
        order = sorted(task.indices)
        col = {x: c for c, x in enumerate(order)}
        for x in order:
            wcet.append(task.wcet_by_index[x])
            cp_flag.append(x in task.cp_members)
            pred_cnt.append(len(task.predecessors[x]))
            succ_idx.extend(col[y] for y in task.successors[x])
            succ_ptr.append(len(succ_idx))
        sub_off.append(len(wcet))
    ranks = np.argsort(np.argsort([t.id for t in ts.tasks], kind="stable"), kind="stable")
    i64 = lambda a: np.asarray(a, dtype=np.int64)
    return (i64(sub_off), i64(wcet), np.asarray(cp_flag, dtype=np.bool_), i64(pred_cnt),
            i64(succ_ptr), i64(succ_idx), i64(ranks))


def simulate(ts: TaskSet, pattern: ReleasePattern = None, horizon=None, lazy=True,
             kernel=None) -> ScheduleTrace:
    """Run preemptive CP-GEDF for ``horizon`` ticks.

    The M ready sub-jobs with the smallest :func:`priority_key` run at every
    tick. Deadline misses do not stop the run. ``lazy=False`` drops the
    critical-path-last rule (plain GEDF, subtask index order) and exists for
    comparison only. ``kernel`` overrides the compiled tick loop, e.g. with
    ``run_cpgedf.py_func``.
    """
    ensure_valid(ts)
    pattern = pattern or ReleasePattern()
    capped = False
    if horizon is None:
        horizon, capped = default_horizon(ts)
    horizon = int(horizon)
    if horizon < 1:
        raise SimulationError("horizon must be >= 1")
    max_p = max((t.period for t in ts.tasks), default=0)
    if horizon + max_p > _MAX_TICK:
        raise SimulationError("horizon %d overflows the tick range" % horizon)
    releases = {t.id: pattern.release_times(t, horizon) for t in ts.tasks}
    job_task, job_index, job_release, job_sub_off = _job_tables(ts, releases)
    structure = _structure_arrays(ts)
    sub_off = structure[0]
    task_job_ptr = np.zeros(len(ts.tasks) + 1, dtype=np.int64)
    np.cumsum(np.bincount(job_task, minlength=len(ts.tasks)), out=task_job_ptr[1:])
    deadlines = np.array([t.deadline for t in ts.tasks], dtype=np.int64)
    job_deadline = job_release + deadlines[job_task] if len(job_task) else job_release
    if not ts.tasks:
        assign = np.full((horizon, ts.processors), -1, dtype=np.int32)
    else:
        run = kernel or run_cpgedf
        assign, _, _ = run(ts.processors, horizon, sub_off, *structure[1:6], structure[6],
                           job_task, job_release, job_deadline, job_sub_off,
                           task_job_ptr, bool(lazy))
    return ScheduleTrace(ts, horizon, assign, job_task, job_index, job_release,
                         job_sub_off, pattern, capped)
