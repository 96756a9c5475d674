"""Sporadic DAG tasks, task sets and their critical paths.

Time is integral throughout; utilizations are exact ``Fraction`` values so that
schedulability verdicts never depend on float rounding.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple


class InvalidTaskError(ValueError):
    """Raised when an operation needs a valid task (set) and did not get one."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Subtask:
    index: int
    wcet: int


class CriticalPath(NamedTuple):
    subtask_indices: tuple
    length: int


@dataclass(frozen=True)
class DagTask:
    """One sporadic DAG task ``(G, d, p)`` with implicit deadline.

    ``edges`` holds ``(pred_index, succ_index)`` pairs using subtask indices
    (1-based, as in the file format). Construction does not validate; call
    :func:`validate` or any analysis entry point for that.
    """

    id: int
    subtasks: tuple
    edges: tuple = ()
    period: int = 1
    deadline: int = None

    def __post_init__(self):
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if self.deadline is None:
            object.__setattr__(self, "deadline", self.period)

    @classmethod
    def from_wcets(cls, id, wcets, edges=(), period=1):
        """Build a task whose subtasks are numbered 1..len(wcets)."""
        subs = tuple(Subtask(k + 1, int(w)) for k, w in enumerate(wcets))
        return cls(id=id, subtasks=subs, edges=tuple(edges), period=period)

    @property
    def indices(self):
        return tuple(s.index for s in self.subtasks)

    @cached_property
    def position(self):
        """Map subtask index -> position in ``subtasks``."""
        return {s.index: k for k, s in enumerate(self.subtasks)}

    @cached_property
    def wcet_by_index(self):
        return {s.index: s.wcet for s in self.subtasks}

    @cached_property
    def successors(self):
        succ = {s.index: [] for s in self.subtasks}
        for a, b in self.edges:
            succ[a].append(b)
        return {k: tuple(sorted(v)) for k, v in succ.items()}

    @cached_property
    def predecessors(self):
        pred = {s.index: [] for s in self.subtasks}
        for a, b in self.edges:
            pred[b].append(a)
        return {k: tuple(sorted(v)) for k, v in pred.items()}

    @property
    def total_wcet(self):
        return sum(s.wcet for s in self.subtasks)

    @property
    def utilization(self):
        return Fraction(self.total_wcet, self.period)

    @cached_property
    def critical_path(self):
        return critical_path(self)

    @property
    def cp_length(self):
        return self.critical_path.length

    @property
    def cp_utilization(self):
        return Fraction(self.cp_length, self.period)

    @cached_property
    def cp_members(self):
        return frozenset(self.critical_path.subtask_indices)


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple
    processors: int = 1
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "_by_id", {t.id: t for t in self.tasks})

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def task(self, task_id):
        return self._by_id[task_id]

    @property
    def total_utilization(self):
        return sum((t.utilization for t in self.tasks), Fraction(0))

    @property
    def max_cp_utilization(self):
        return max((t.cp_utilization for t in self.tasks), default=Fraction(0))

    @property
    def max_utilization(self):
        return max((t.utilization for t in self.tasks), default=Fraction(0))


class Aggregates(NamedTuple):
    total_utilization: Fraction
    max_cp_utilization: Fraction
    max_utilization: Fraction


def _topological_order(task):
    """Kahn's algorithm, smallest index first; None if the graph has a cycle."""
    indeg = {s.index: 0 for s in task.subtasks}
    for _, b in task.edges:
        indeg[b] += 1
    heap = [k for k, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in task.successors[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) != len(task.subtasks):
        return None
    return order


def _longest_chain(task, order):
    # suffix DP: best chain starting at v; successors visited in index order
    # so the first maximal successor gives the lexicographically smallest tail.
    best_len = {}
    best_next = {}
    for v in reversed(order):
        nxt, tail = None, 0
        for w in task.successors[v]:
            if best_len[w] > tail:
                nxt, tail = w, best_len[w]
        best_len[v] = task.wcet_by_index[v] + tail
        best_next[v] = nxt
    start = min(best_len, key=lambda v: (-best_len[v], v))
    path = [start]
    while best_next[path[-1]] is not None:
        path.append(best_next[path[-1]])
    return CriticalPath(tuple(path), best_len[start])


def _structural_violations(task):
    out = []
    if not task.subtasks:
        return ["task %s has no subtasks" % task.id]
    seen = set()
    for s in task.subtasks:
        if not isinstance(s.index, int) or s.index < 1:
            out.append("subtask index %r is not a positive integer" % (s.index,))
        if s.index in seen:
            out.append("duplicate subtask index %s" % s.index)
        seen.add(s.index)
        if not isinstance(s.wcet, int) or s.wcet < 1:
            out.append("subtask %s wcet %r < 1" % (s.index, s.wcet))
    seen_edges = set()
    for e in task.edges:
        if len(e) != 2:
            out.append("malformed edge %r" % (e,))
            continue
        a, b = e
        if a not in seen or b not in seen:
            out.append("edge (%s,%s) references unknown subtask" % (a, b))
        if a == b:
            out.append("self-edge on subtask %s" % a)
        if (a, b) in seen_edges:
            out.append("duplicate edge (%s,%s)" % (a, b))
        seen_edges.add((a, b))
    return out


def validate(task: DagTask) -> list:
    """Return every violated model constraint of ``task``; empty iff valid."""
    out = _structural_violations(task)
    if not isinstance(task.period, int) or task.period < 1:
        out.append("period %r < 1" % (task.period,))
    if task.deadline != task.period:
        out.append("deadline %s != period %s" % (task.deadline, task.period))
    if out:
        return out
    order = _topological_order(task)
    if order is None:
        return ["cycle in subtask graph"]
    cp = _longest_chain(task, order)
    if cp.length > task.period:
        out.append("cp length %d > period %d" % (cp.length, task.period))
    return out


def validate_taskset(ts: TaskSet) -> list:
    """Task-level violations (prefixed with the task id) plus set-level ones.

    ``U_sum > M`` is reported here but operations only refuse structurally
    invalid sets: simulation of overloaded sets is a legitimate use.
    """
    out = []
    if not isinstance(ts.processors, int) or ts.processors < 1:
        out.append("processors %r < 1" % (ts.processors,))
    ids = [t.id for t in ts.tasks]
    if len(set(ids)) != len(ids):
        out.append("duplicate task ids")
    for t in ts.tasks:
        out.extend("task %s: %s" % (t.id, v) for v in validate(t))
    if not out and ts.total_utilization > ts.processors:
        out.append("U_sum %s > M %s" % (ts.total_utilization, ts.processors))
    return out


def ensure_valid(ts: TaskSet, allow_overload=True):
    bad = validate_taskset(ts)
    if allow_overload:
        bad = [v for v in bad if not v.startswith("U_sum")]
    if bad:
        raise InvalidTaskError(bad)


def critical_path(task: DagTask) -> CriticalPath:
    """Longest chain by topological order + DP, O(V + E).

    Ties are broken towards the lexicographically smallest index sequence.
    """
    bad = _structural_violations(task)
    order = None if bad else _topological_order(task)
    if order is None:
        raise InvalidTaskError(bad or ["cycle in subtask graph"])
    return _longest_chain(task, order)


def cp_utilization(task: DagTask) -> Fraction:
    return task.cp_utilization


def aggregates(ts: TaskSet) -> Aggregates:
    return Aggregates(ts.total_utilization, ts.max_cp_utilization,
                      ts.max_utilization)


def single_subtask_companion(ts: TaskSet) -> TaskSet:
    """Ordinary sporadic tasks with the same (C_i, p_i) as each DAG task."""
    return TaskSet(
        tuple(DagTask.from_wcets(t.id, [t.total_wcet], period=t.period)
              for t in ts.tasks),
        ts.processors,
    )
