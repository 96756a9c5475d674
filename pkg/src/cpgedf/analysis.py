"""Utilization-based schedulability tests for CP-GEDF and the workload bounds
they rest on. Everything is exact ``Fraction`` arithmetic.
"""

from __future__ import annotations

import json
from bisect import bisect_right, bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .model import DagTask, TaskSet, ensure_valid


class TaskSlack(NamedTuple):
    task_id: Optional[int]
    lhs: Fraction
    rhs: Fraction
    slack: Fraction
    sigma: Optional[Fraction] = None


@dataclass(frozen=True)
class TestVerdict:
    test: str
    schedulable: bool
    per_task: tuple = field(default=())

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        return {
            "test": self.test,
            "schedulable": self.schedulable,
            "per_task": [{"id": r.task_id, "lhs": fraction_str(r.lhs),
                          "rhs": fraction_str(r.rhs)} for r in self.per_task],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


class WorkloadBound(NamedTuple):
    task_id: int
    delta: int
    lam: int
    workload: Fraction


def fraction_str(q):
    q = Fraction(q)
    return "%d/%d" % (q.numerator, q.denominator)


def _verdict(name, rows):
    rows = tuple(rows)
    return TestVerdict(name, all(r.slack >= 0 for r in rows), rows)


def eta(task_i: DagTask, sigma_h, p_h) -> Fraction:
    """Per-task bound on average workload over a maximal sigma_h-busy window."""
    u = task_i.utilization
    sigma_h = Fraction(sigma_h)
    if sigma_h >= u:
        return u
    return u + (task_i.total_wcet - sigma_h * task_i.period) / Fraction(p_h)


class _EtaSums:
    """Sum of eta_i over all tasks for arbitrary (sigma, p_h) in O(log n).

    With tasks sorted by utilization, the tasks in the second branch of eta
    are a suffix, so the sum is ``U + (sum C - sigma * sum p) / p_h`` over it.
    """

    def __init__(self, tasks):
        ordered = sorted(tasks, key=lambda t: t.utilization)
        self.us = [t.utilization for t in ordered]
        n = len(ordered)
        self.suffix_c = [0] * (n + 1)
        self.suffix_p = [0] * (n + 1)
        for j in range(n - 1, -1, -1):
            self.suffix_c[j] = self.suffix_c[j + 1] + ordered[j].total_wcet
            self.suffix_p[j] = self.suffix_p[j + 1] + ordered[j].period
        self.total = sum(self.us, Fraction(0))

    def period_above(self, sigma):
        return self.suffix_p[bisect_right(self.us, sigma)]

    def __call__(self, sigma, p_h):
        j = bisect_right(self.us, sigma)
        return self.total + (self.suffix_c[j] - sigma * self.suffix_p[j]) / Fraction(p_h)


def _best_sigma(sums, sigma_k, p_k, m):
    """Minimiser over [sigma_k, 1] of  sum(eta(s)) + (m-1) s.

    The objective is convex piecewise linear with breakpoints at the task
    utilizations; its right slope is (m-1) - sum_{u_i > s} p_i / p_k.
    """
    one = Fraction(1)
    if sigma_k >= one or sums.period_above(sigma_k) <= (m - 1) * p_k:
        return sigma_k
    us = sums.us
    lo, hi = bisect_right(us, sigma_k), bisect_left(us, one)
    while lo < hi:
        mid = (lo + hi) // 2
        if sums.period_above(us[mid]) <= (m - 1) * p_k:
            hi = mid
        else:
            lo = mid + 1
    return us[lo] if lo < bisect_left(us, one) else one


def cpgedf_test(ts: TaskSet, lifted=True) -> TestVerdict:
    """Utilization-based test for GEDF under the Lazy-Cpath policy.

    For each task k the condition ``sum_i eta_i(s, p_k) <= M - (M-1) s`` is
    checked. With ``lifted=False`` ``s`` is sigma_k exactly. By default ``s``
    ranges over [sigma_k, 1] and the most favourable value is used: a miss by
    task k makes its problem window s-busy for every s >= sigma_k, so the same
    window argument goes through. This is what makes the single-subtask case
    coincide with the density test.
    """
    ensure_valid(ts)
    m = ts.processors
    sums = _EtaSums(ts.tasks)
    rows = []
    for k in ts.tasks:
        s = k.cp_utilization
        if lifted:
            s = _best_sigma(sums, s, k.period, m)
        lhs = sums(s, k.period)
        rhs = m - (m - 1) * s
        rows.append(TaskSlack(k.id, lhs, rhs, rhs - lhs, s))
    return _verdict("cpgedf", rows)


def density_test(ts: TaskSet) -> TestVerdict:
    """``U_sum <= M - (M-1) u_max``, reported per task as ``U_sum <= M - (M-1) u_k``."""
    ensure_valid(ts)
    m = ts.processors
    total = ts.total_utilization
    rows = []
    for k in ts.tasks:
        rhs = m - (m - 1) * k.utilization
        rows.append(TaskSlack(k.id, total, rhs, rhs - total, k.utilization))
    return _verdict("density", rows)


def cab_test(ts: TaskSet) -> TestVerdict:
    """Capacity-augmentation test: U_sum <= M/(4-2/M) and len(Cpath_i) <= d_i/(4-2/M).

    The first row (``task_id=None``) carries the utilization condition.
    """
    ensure_valid(ts)
    m = ts.processors
    factor = 4 - Fraction(2, m)
    total = ts.total_utilization
    rows = [TaskSlack(None, total, m / factor, m / factor - total)]
    for t in ts.tasks:
        lhs = Fraction(t.cp_length, t.deadline)
        rows.append(TaskSlack(t.id, lhs, 1 / factor, 1 / factor - lhs))
    return _verdict("cab", rows)


TESTS = {
    "cpgedf": cpgedf_test,
    "density": density_test,
    "cab": cab_test,
}


def carryin_bound(task_i: DagTask, sigma_h, lam) -> Fraction:
    """Upper bound on the carry-in workload for release offset ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return max(Fraction(0), task_i.total_wcet - Fraction(sigma_h) * lam)


def workload_bound(task_i: DagTask, sigma_h, delta) -> WorkloadBound:
    """Bound on the workload of ``task_i`` in a maximal sigma_h-busy window of
    length ``delta``: whole jobs in the body plus the carry-in head."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    p = task_i.period
    jobs = delta // p
    lam = (jobs + 1) * p - delta
    w = jobs * task_i.total_wcet + carryin_bound(task_i, sigma_h, lam)
    return WorkloadBound(task_i.id, delta, lam, Fraction(w))
