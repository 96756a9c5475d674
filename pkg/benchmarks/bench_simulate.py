"""Compare the compiled and interpreted simulator tick loops.

    python3 benchmarks/bench_simulate.py [--horizon N] [--repeat R]

The interpreted loop is ``run_cpgedf.py_func``, i.e. exactly what runs when
``CPGEDF_DISABLE_NUMBA=1`` is set.
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from cpgedf._jit import NUMBA_ENABLED
from cpgedf.generator import GenConfig, fuzz_taskset, gen_taskset
from cpgedf.model import DagTask, TaskSet
from cpgedf.sim import simulate
from cpgedf.sim.kernels import run_cpgedf


def workloads():
    yield "fuzz, 5 tasks, M=4", fuzz_taskset(2, processors=(4, 4))
    ts, _ = gen_taskset(GenConfig(8, "light", "short", Fraction(6), seed=1))
    # the exact-cap rescaling inflates periods; rebuild at millisecond scale
    scale = max(t.period for t in ts) // 200 or 1
    tasks = [DagTask.from_wcets(t.id, [max(1, s.wcet // scale) for s in t.subtasks],
                                t.edges, max(t.period // scale, t.cp_length // scale + 1))
             for t in ts]
    yield "generated light/short, M=8", TaskSet(tasks, 8)


def bench(ts, horizon, kernel, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = simulate(ts, horizon=horizon, kernel=kernel)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not NUMBA_ENABLED:
        print("numba disabled by CPGEDF_DISABLE_NUMBA; both columns are interpreted")
    simulate(fuzz_taskset(0), horizon=10)  # compile outside the timed region
    print("%-30s %6s %10s %12s %8s" % ("workload", "tasks", "jit [s]", "python [s]", "speedup"))
    for name, ts in workloads():
        fast, a = bench(ts, args.horizon, None, args.repeat)
        slow, b = bench(ts, args.horizon, run_cpgedf.py_func, 1)
        assert np.array_equal(a.assign, b.assign), "backends disagree"
        print("%-30s %6d %10.4f %12.4f %7.0fx" % (name, len(ts), fast, slow, slow / fast))


if __name__ == "__main__":
    main()
