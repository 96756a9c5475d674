"""Trace analyzers: critical-path intervals, busy intervals, the structural
properties CP-GEDF guarantees, and the necessary conditions at a deadline miss.

Every checker returns a list of findings; an empty list means the property
holds on the trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from ..analysis import carryin_bound, eta, workload_bound
from .engine import ScheduleTrace, runs


class CpInterval(NamedTuple):
    start: int
    end: int
    executing: bool

    @property
    def length(self):
        return self.end - self.start


class LemmaViolation(NamedTuple):
    check: str
    task_id: int
    job_index: int
    detail: str


def _job_window(trace: ScheduleTrace, k):
    comp = trace.job_completion[k]
    end = int(comp) if comp >= 0 else trace.horizon
    return int(trace.job_release[k]), end


def _cp_running(trace: ScheduleTrace, k):
    """Per-tick flag: some critical-path sub-job of dag-job row k runs."""
    insts = trace.job_insts(k)
    cp = insts[trace.inst_on_cp[insts]]
    return np.isin(trace.assign, cp).any(axis=1)


def _classify_row(trace, k):
    start, end = _job_window(trace, k)
    if end <= start:
        return []
    on = _cp_running(trace, k)[start:end]
    out = [CpInterval(a, b, True) for a, b in runs(on, start)]
    out += [CpInterval(a, b, False) for a, b in runs(~on, start)]
    return sorted(out)


def classify_cp_intervals(trace: ScheduleTrace, task_id, job_index):
    """Split ``[release, completion)`` of one dag-job into maximal intervals in
    which its critical path executes continuously or not at all.

    An unfinished dag-job is cut at the horizon. ``job_index`` is 1-based.
    """
    return _classify_row(trace, trace.job_row(task_id, job_index))


def busy_intervals(trace: ScheduleTrace):
    """Maximal ``(start, end)`` intervals during which all M processors run."""
    return runs((trace.assign >= 0).all(axis=1))


def _cp_insts(trace, k):
    task = trace.taskset.tasks[trace.job_task[k]]
    base = trace.job_sub_off[k]
    order = sorted(task.indices)
    return task, [base + order.index(x) for x in task.critical_path.subtask_indices]


def _ident(trace, k):
    return trace.taskset.tasks[trace.job_task[k]].id, int(trace.job_index[k])


def check_lemma1(trace: ScheduleTrace):
    """Each critical-path sub-job after the first becomes ready exactly when
    its critical-path predecessor completes."""
    out = []
    ready, finish = trace.ready, trace.finish
    for k in range(trace.n_jobs):
        task, cp = _cp_insts(trace, k)
        for a, b in zip(cp, cp[1:]):
            if finish[a] < 0:
                break
            if ready[b] != finish[a]:
                tid, j = _ident(trace, k)
                out.append(LemmaViolation(
                    "lemma1", tid, j,
                    "cp subtask %d ready at %d, cp predecessor %d completed at %d"
                    % (trace.inst_subtask[b], ready[b], trace.inst_subtask[a], finish[a])))
    return out


def check_lemma2(trace: ScheduleTrace):
    """A dag-job completes exactly when its last critical-path sub-job does."""
    out = []
    comp, finish = trace.job_completion, trace.finish
    for k in range(trace.n_jobs):
        if comp[k] < 0:
            continue
        _, cp = _cp_insts(trace, k)
        if finish[cp[-1]] != comp[k]:
            tid, j = _ident(trace, k)
            out.append(LemmaViolation(
                "lemma2", tid, j, "dag-job completed at %d, last cp sub-job at %d"
                % (comp[k], finish[cp[-1]])))
    return out


def check_lemma3(trace: ScheduleTrace):
    """Every non-executing critical-path interval is a busy interval.

    Only the part before the first deadline miss is checked: once a dag-job is
    late its successor can be held back while processors sit idle.
    """
    out = []
    busy = (trace.assign >= 0).all(axis=1)
    limit = trace.first_miss if trace.first_miss is not None else trace.horizon
    for k in range(trace.n_jobs):
        for iv in _classify_row(trace, k):
            if iv.executing or iv.start >= limit:
                continue
            end = min(iv.end, limit)
            idle = np.flatnonzero(~busy[iv.start:end])
            if idle.size:
                tid, j = _ident(trace, k)
                out.append(LemmaViolation(
                    "lemma3", tid, j, "non-executing [%d,%d) has a non-busy tick at %d"
                    % (iv.start, iv.end, iv.start + idle[0])))
    return out


def _inst_keys(trace):
    """Integer encoding of the priority key of every sub-job."""
    ts = trace.taskset
    n_tasks = len(ts.tasks)
    span_cp = max((len(t.subtasks) for t in ts.tasks), default=1)
    span_rank = 2 * span_cp
    span_dl = max(n_tasks, 1) * span_rank
    rank = np.argsort(np.argsort([t.id for t in ts.tasks], kind="stable"), kind="stable")
    job = trace.inst_job
    local = np.arange(trace.n_inst) - trace.job_sub_off[job]
    return (trace.job_deadline[job] * span_dl + rank[trace.job_task[job]] * span_rank
            + trace.inst_on_cp.astype(np.int64) * span_cp + local)


def check_work_conservation(trace: ScheduleTrace):
    """A ready sub-job waits only while all M processors run sub-jobs with a
    strictly smaller priority key."""
    out = []
    if trace.n_inst == 0:
        return out
    keys = _inst_keys(trace)
    running = trace.assign >= 0
    mapped = np.where(running, keys[np.maximum(trace.assign, 0)], -1)
    worst = mapped.max(axis=1)
    full = running.all(axis=1)
    ready, finish = trace.ready, trace.finish
    for x in range(trace.n_inst):
        if ready[x] < 0 or ready[x] >= trace.horizon:
            continue
        end = finish[x] if finish[x] >= 0 else trace.horizon
        ran = (trace.assign[ready[x]:end] == x).any(axis=1)
        ok = ran | (full[ready[x]:end] & (worst[ready[x]:end] < keys[x]))
        bad = np.flatnonzero(~ok)
        if bad.size:
            tid, j = _ident(trace, trace.inst_job[x])
            out.append(LemmaViolation(
                "work-conservation", tid, j, "subtask %d ready but not run at %d"
                % (trace.inst_subtask[x], ready[x] + bad[0])))
    return out


def check_trace_invariants(trace: ScheduleTrace):
    """Model-level sanity of a trace.

    No sub-job runs twice in a tick, none runs before it is ready or beyond
    its WCET, and releases of a task are at least a period apart.
    """
    out = []
    a = trace.assign
    s = np.sort(a, axis=1)
    dup = ((s[:, 1:] == s[:, :-1]) & (s[:, 1:] >= 0)).any(axis=1)
    for t in np.flatnonzero(dup)[:1]:
        out.append(LemmaViolation("trace", -1, -1, "sub-job on two processors at %d" % t))
    over = np.flatnonzero(trace.exec_count > trace.inst_wcet)
    early = np.flatnonzero((trace.start >= 0) & ((trace.ready < 0) | (trace.start < trace.ready)))
    for x in over:
        tid, j = _ident(trace, trace.inst_job[x])
        out.append(LemmaViolation("trace", tid, j, "subtask %d ran %d > wcet %d" % (
            trace.inst_subtask[x], trace.exec_count[x], trace.inst_wcet[x])))
    for x in early:
        tid, j = _ident(trace, trace.inst_job[x])
        out.append(LemmaViolation("trace", tid, j, "subtask %d ran at %d before ready %d" % (
            trace.inst_subtask[x], trace.start[x], trace.ready[x])))
    for k in range(1, trace.n_jobs):
        if trace.job_task[k] == trace.job_task[k - 1]:
            gap = trace.job_release[k] - trace.job_release[k - 1]
            period = trace.taskset.tasks[trace.job_task[k]].period
            if gap < period:
                tid, j = _ident(trace, k)
                out.append(LemmaViolation("trace", tid, j, "released %d after previous, "
                                          "period %d" % (gap, period)))
    return out


@dataclass(frozen=True)
class TaskWindowStats:
    """Per-task quantities inside the maximal busy window of one miss.

    ``lemma7`` is ``None`` when there is no carry-in work to bound.
    """

    task_id: int
    lam: Optional[int]
    carry_in: int
    carry_in_bound: Fraction
    lemma7: Optional[bool]
    lemma8: bool
    workload: int
    workload_bound: Fraction
    eta: Fraction
    lemma9: bool
    lemma10: bool


@dataclass(frozen=True)
class WindowDiagnostics:
    start: int
    delta: int
    threshold: Fraction
    per_task: tuple


@dataclass(frozen=True)
class MissReport:
    """Necessary conditions at the first deadline miss for one dag-job."""

    task_id: int
    job_index: int
    release: int
    deadline: int
    non_executing: int
    slack_bound: int          # p_h - len(Cpath_h)
    workload: int
    threshold: Fraction       # M(1 - sigma_h) + sigma_h
    window: Optional[WindowDiagnostics] = None

    @property
    def lemma4(self):
        return self.non_executing > self.slack_bound

    @property
    def lemma5(self):
        return Fraction(self.workload, self.deadline - self.release) > self.threshold

    @property
    def holds(self):
        return self.lemma4 and self.lemma5


def _window(trace, h_task, t_d, release, per_tick, cum, threshold):
    """Maximal downward extension of ``[release, t_d)`` whose average
    workload stays at or above ``threshold``."""
    t = np.arange(release + 1)
    work = cum[t_d] - cum[t]
    ok = work * threshold.denominator >= threshold.numerator * (t_d - t)
    hits = np.flatnonzero(ok)
    t0 = int(hits[0]) if hits.size else release
    delta = t_d - t0
    sigma = h_task.cp_utilization
    m = trace.processors
    stats = []
    for i, task in enumerate(trace.taskset.tasks):
        rows = np.flatnonzero((trace.job_task == i) & (trace.job_deadline <= t_d))
        insts = np.concatenate([trace.job_insts(k) for k in rows]) if rows.size else []
        w_i = int(np.isin(trace.assign[t0:t_d], insts).sum())
        before = rows[trace.job_release[rows] < t0]
        lam, eps, lemma7 = None, 0, None
        if before.size:
            c = before[-1]
            lam = t0 - int(trace.job_release[c])
            done = int(np.isin(trace.assign[:t0], trace.job_insts(c)).sum())
            eps = task.total_wcet - done
            if eps > 0:
                seg = int(cum[t0] - cum[t0 - lam])
                lemma7 = Fraction(seg, lam) >= (m - 1) * Fraction(lam - task.total_wcet + eps, lam) + 1
        bound_eps = carryin_bound(task, sigma, lam or 0)
        wb = workload_bound(task, sigma, delta).workload
        e = eta(task, sigma, h_task.period)
        stats.append(TaskWindowStats(task.id, lam, eps, bound_eps, lemma7,
                                     lam is None or eps <= bound_eps, w_i, wb, e,
                                     w_i <= wb, Fraction(w_i, delta) <= e))
    return WindowDiagnostics(t0, delta, threshold, tuple(stats))


def check_miss_necessary_conditions(trace: ScheduleTrace, windows=True):
    """One :class:`MissReport` per dag-job missing its deadline at the first miss.

    Workload counts only sub-jobs of dag-jobs whose deadline is at most the
    miss instant; later dag-jobs cannot affect the missing one. With
    ``windows`` the maximal busy-window diagnostics are attached too.
    """
    t_d = trace.first_miss
    if t_d is None:
        return []
    m = trace.processors
    counted = trace.job_deadline[trace.inst_job] <= t_d
    a = trace.assign
    per_tick = np.where(a >= 0, counted[np.maximum(a, 0)], False).sum(axis=1)
    cum = np.concatenate(([0], np.cumsum(per_tick, dtype=np.int64)))
    reports = []
    for tid, j, d in trace.misses:
        if d != t_d:
            continue
        k = trace.job_row(tid, j)
        task = trace.taskset.tasks[trace.job_task[k]]
        r = int(trace.job_release[k])
        on = _cp_running(trace, k)[r:t_d]
        sigma = task.cp_utilization
        threshold = m * (1 - sigma) + sigma
        win = _window(trace, task, t_d, r, per_tick, cum, threshold) if windows else None
        reports.append(MissReport(tid, j, r, t_d, int((~on).sum()),
                                  task.period - task.cp_length,
                                  int(cum[t_d] - cum[r]), threshold, win))
    return reports
