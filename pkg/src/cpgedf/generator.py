"""Random DAG task sets.

``gen_taskset`` follows the experimental recipe: periods uniform over a range,
utilization and cp-utilization drawn from per-class ranges, tasks added until
the utilization cap is reached and the last task's period stretched so the
total hits the cap exactly. ``fuzz_taskset`` produces small sets with short
hyperperiods for simulation-based property checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from .model import DagTask, TaskSet, validate

UTIL_CLASSES = {
    "light": (0.005, 0.5),
    "medium": (0.5, 1.0),
    "heavy": (1.0, 1.5),
}
# cp-utilization as a fraction of the task's utilization
CP_CLASSES = {
    "short": (0.1, 0.3),
    "long": (0.3, 0.5),
}

FUZZ_PERIODS = (20, 24, 30, 40, 48, 60, 80, 120)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    processors: int = 8
    util_class: str = "medium"
    cp_class: str = "short"
    util_cap: Fraction = Fraction(1)
    seed: int = 0
    period_range: tuple = (50, 200)
    ticks_per_ms: int = 1
    max_retries: int = 100

    def __post_init__(self):
        object.__setattr__(self, "util_cap", Fraction(self.util_cap))
        if self.util_class not in UTIL_CLASSES:
            raise ValueError("util_class must be one of %s" % ", ".join(UTIL_CLASSES))
        if self.cp_class not in CP_CLASSES:
            raise ValueError("cp_class must be one of %s" % ", ".join(CP_CLASSES))
        if self.processors < 1:
            raise ValueError("processors must be >= 1")
        if not 0 < self.util_cap <= self.processors:
            raise ValueError("util_cap must be in (0, M]")
        lo, hi = self.period_range
        if not 1 <= lo <= hi:
            raise ValueError("bad period range %r" % (self.period_range,))
        if self.ticks_per_ms < 1:
            raise ValueError("ticks_per_ms must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["util_cap"] = "%d/%d" % (self.util_cap.numerator, self.util_cap.denominator)
        d["period_range"] = list(self.period_range)
        return d


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _apportion(total, weights):
    """Split ``total`` into ``len(weights)`` integers >= 1 proportional to the
    weights, by largest remainder."""
    n = len(weights)
    spare = total - n
    w = np.asarray(weights, dtype=float)
    raw = spare * w / w.sum()
    parts = np.floor(raw).astype(np.int64)
    short = spare - int(parts.sum())
    parts[np.argsort(-(raw - parts), kind="stable")[:short]] += 1
    return [int(x) + 1 for x in parts]


def _chain_targets(period, target_u, target_sigma):
    c = max(1, round(target_u * period))
    length = min(max(1, round(target_sigma * period)), c, period)
    return c, length


def gen_dag_structure(period, target_u, target_sigma, seed=None, task_id=1) -> DagTask:
    """A DAG whose critical path is a designated chain of ``round(sigma p)``
    ticks carrying ``round(u p)`` ticks in total.

    The chain has 2 to 5 segments. The remaining work hangs off it in
    branches of 1 to 3 subtasks. A branch from chain node ``a`` to ``b`` is
    strictly shorter than the chain between them, so any path through a branch
    is shorter than the chain and the chain is the unique critical path.
    """
    rng = _rng(seed)
    c, length = _chain_targets(period, target_u, target_sigma)
    rest = c - length
    if rest > 0 and length < 2:
        raise GenerationError(
            "cannot hang %d off-chain ticks on a %d-tick chain (p=%d, u=%.4g, sigma=%.4g)"
            % (rest, length, period, target_u, target_sigma))
    n_seg = min(length, int(rng.integers(2, 6)))
    chain = _apportion(length, rng.random(n_seg) + 0.25)
    wcets = list(chain)
    edges = [(k, k + 1) for k in range(1, n_seg)]
    prefix = np.concatenate(([0], np.cumsum(chain)))

    # attachment points (a, b): a=0 means no predecessor, b=n_seg+1 no successor;
    # the budget is the chain work strictly between them, minus one tick
    spans = [(a, b, int(prefix[b - 1] - prefix[a]) - 1)
             for a in range(0, n_seg + 1) for b in range(a + 1, n_seg + 2)]
    spans = [s for s in spans if s[2] >= 1]
    while rest > 0:
        a, b, budget = spans[int(rng.integers(len(spans)))]
        size = min(rest, int(rng.integers((budget + 1) // 2, budget + 1)))
        nodes = int(rng.integers(1, min(3, size) + 1))
        first = len(wcets) + 1
        wcets.extend(_apportion(size, rng.random(nodes) + 0.25))
        edges.extend((v, v + 1) for v in range(first, first + nodes - 1))
        if a >= 1:
            edges.append((a, first))
        if b <= n_seg:
            edges.append((first + nodes - 1, b))
        rest -= size
    task = DagTask.from_wcets(task_id, wcets, edges, period)
    bad = validate(task)
    if bad or task.critical_path.subtask_indices != tuple(range(1, n_seg + 1)):
        raise GenerationError("synthesized DAG is inconsistent: %s" % (bad or "cp moved"))
    return task


def _draw(cfg: GenConfig, rng, task_id):
    lo_u, hi_u = UTIL_CLASSES[cfg.util_class]
    lo_r, hi_r = CP_CLASSES[cfg.cp_class]
    lo_p, hi_p = cfg.period_range
    for _ in range(cfg.max_retries):
        period = int(rng.integers(lo_p, hi_p + 1)) * cfg.ticks_per_ms
        u = float(rng.uniform(lo_u, hi_u))
        sigma = u * float(rng.uniform(lo_r, hi_r))
        try:
            return gen_dag_structure(period, u, sigma, rng, task_id), (u, sigma)
        except GenerationError:
            continue
    raise GenerationError("no feasible task after %d draws (%s/%s, periods %s)"
                          % (cfg.max_retries, cfg.util_class, cfg.cp_class,
                             cfg.period_range))


def _scale(task: DagTask, factor, period=None):
    return DagTask.from_wcets(task.id, [s.wcet * factor for s in task.subtasks],
                              task.edges, period if period is not None else task.period * factor)


def gen_taskset(cfg: GenConfig):
    """Draw a task set with total utilization exactly ``cfg.util_cap``.

    Returns ``(TaskSet, metadata)``. Stretching the last period to an exact
    rational generally needs a finer time unit, so all periods and WCETs are
    multiplied by a common integer ``time_scale``, which utilizations and
    cp-utilizations do not notice. Metadata records the config, the scale and
    the realized and target (u, sigma) of every task.
    """
    rng = np.random.default_rng(cfg.seed)
    tasks, targets = [], []
    total = Fraction(0)
    while total < cfg.util_cap:
        task, target = _draw(cfg, rng, len(tasks) + 1)
        tasks.append(task)
        targets.append(target)
        total += task.utilization
    last = tasks[-1]
    room = cfg.util_cap - (total - last.utilization)
    stretched = Fraction(last.total_wcet) / room
    scale = stretched.denominator
    tasks = [_scale(t, scale) for t in tasks[:-1]]
    tasks.append(_scale(last, scale, stretched.numerator))
    ts = TaskSet(tuple(tasks), cfg.processors)
    if ts.total_utilization != cfg.util_cap:
        raise GenerationError("utilization cap missed: %s != %s"
                              % (ts.total_utilization, cfg.util_cap))
    metadata = {
        "config": cfg.to_dict(),
        "time_scale": scale,
        "tolerance_ticks": 1,
        "tasks": [
            {"id": t.id, "u": _fs(t.utilization), "sigma": _fs(t.cp_utilization),
             "target_u": u, "target_sigma": s}
            for t, (u, s) in zip(tasks, targets)
        ],
    }
    return ts, metadata


def _fs(q):
    return "%d/%d" % (q.numerator, q.denominator)


def fuzz_taskset(seed, max_tasks=5, max_subtasks=8, processors=(1, 4),
                 wcet=(1, 8), periods=FUZZ_PERIODS, edge_prob=0.35, overload=False):
    """Small random DAG task set for simulation fuzzing.

    Periods come from a set with a small common multiple so the default
    horizon stays short. With ``overload`` the shortest admissible periods
    are favoured so that deadline misses are likely.
    """
    rng = _rng(seed)
    m = int(rng.integers(processors[0], processors[1] + 1))
    n = int(rng.integers(1, max_tasks + 1))
    tasks = []
    for tid in range(1, n + 1):
        k = int(rng.integers(1, max_subtasks + 1))
        wcets = rng.integers(wcet[0], wcet[1] + 1, size=k).tolist()
        edges = [(a, b) for a in range(1, k + 1) for b in range(a + 1, k + 1)
                 if rng.random() < edge_prob]
        task = DagTask.from_wcets(tid, wcets, edges, 1)
        fit = [p for p in periods if p >= task.cp_length]
        if not fit:
            fit = [lcm(*periods) * ((task.cp_length - 1) // lcm(*periods) + 1)]
        if overload:
            fit = fit[:2]
        period = int(fit[int(rng.integers(len(fit)))])
        tasks.append(DagTask.from_wcets(tid, wcets, edges, period))
    return TaskSet(tuple(tasks), m)
