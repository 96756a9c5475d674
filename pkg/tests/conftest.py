import itertools

import pytest
from hypothesis import settings, strategies as st

from cpgedf.model import DagTask, TaskSet

settings.register_profile("default", deadline=None, max_examples=150)
settings.load_profile("default")


# -- worked examples --------------------------------------------------------

def fork_join_task():
    # 1 fans out to 2 and 3, both join into 4
    return DagTask.from_wcets(1, [10, 15, 5, 10], [(1, 2), (1, 3), (2, 4), (3, 4)], 50)


def lazy_preempt_task():
    return DagTask.from_wcets(
        1, [10, 5, 5, 5, 15, 10],
        [(1, 2), (1, 5), (2, 3), (2, 4), (3, 6), (4, 6), (5, 6)], 50)


def busy_pair_taskset():
    t1 = DagTask.from_wcets(1, [10] * 4, [(1, 2), (1, 3), (2, 4), (3, 4)], 40)
    t2 = DagTask.from_wcets(2, [10] * 4, [(1, 2), (1, 3), (3, 4)], 50)
    return TaskSet((t1, t2), 2)


@pytest.fixture
def fork_join():
    return fork_join_task()


@pytest.fixture
def lazy_preempt():
    return lazy_preempt_task()


@pytest.fixture
def busy_pair():
    return busy_pair_taskset()


# -- brute-force oracles ----------------------------------------------------

def all_chains(task):
    """Every maximal-by-extension path, enumerated by DFS from every vertex."""
    succ = {s.index: [] for s in task.subtasks}
    for a, b in task.edges:
        succ[a].append(b)
    out = []

    def walk(path):
        out.append(tuple(path))
        for nxt in succ[path[-1]]:
            walk(path + [nxt])

    for s in task.subtasks:
        walk([s.index])
    return out


def brute_critical_path(task):
    w = task.wcet_by_index
    chains = all_chains(task)
    best = max(sum(w[v] for v in c) for c in chains)
    return min(c for c in chains if sum(w[v] for v in c) == best), best


# -- hypothesis strategies --------------------------------------------------

@st.composite
def dag_tasks(draw, task_id=1, max_nodes=8, max_wcet=10):
    n = draw(st.integers(1, max_nodes))
    wcets = draw(st.lists(st.integers(1, max_wcet), min_size=n, max_size=n))
    pairs = [(a, b) for a, b in itertools.combinations(range(1, n + 1), 2)]
    picks = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    # relabel so edges do not always point from low to high index
    perm = draw(st.permutations(range(1, n + 1)))
    edges = [(perm[a - 1], perm[b - 1]) for (a, b), keep in zip(pairs, picks) if keep]
    probe = DagTask.from_wcets(task_id, wcets, edges, 1)
    slack = draw(st.integers(0, 3 * sum(wcets)))
    return DagTask.from_wcets(task_id, wcets, edges, probe.cp_length + slack)


@st.composite
def task_sets(draw, max_tasks=6, max_m=8, **kw):
    n = draw(st.integers(0, max_tasks))
    tasks = [draw(dag_tasks(task_id=i + 1, **kw)) for i in range(n)]
    return TaskSet(tuple(tasks), draw(st.integers(1, max_m)))
