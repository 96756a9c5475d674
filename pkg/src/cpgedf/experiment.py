"""Schedulability-fraction curves: acceptance ratio of each test versus the
utilization cap, written as CSV and SVG."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .analysis import cab_test, cpgedf_test, density_test
from .generator import GenConfig, GenerationError, gen_taskset
from .model import single_subtask_companion

TEST_LABELS = {
    "cpgedf": "CP-GEDF",
    "cab": "CAB",
    "u-ordinary": "U-ordinary (density)",
}
DEFAULT_TESTS = ("cab", "cpgedf", "u-ordinary")


def default_caps(processors, step=Fraction(1, 10)):
    n = int(Fraction(processors) / step)
    return tuple(step * k for k in range(1, n + 1))


@dataclass(frozen=True)
class ExperimentGrid:
    processors: int = 8
    util_class: str = "medium"
    cp_class: str = "short"
    caps: tuple = ()
    sets_per_point: int = 100
    tests: tuple = DEFAULT_TESTS
    seed: int = 0
    workers: int = 1
    period_range: tuple = (50, 200)

    def __post_init__(self):
        caps = tuple(Fraction(c) for c in self.caps) or default_caps(self.processors)
        object.__setattr__(self, "caps", caps)
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError("caps must be strictly ascending")
        if self.sets_per_point < 1:
            raise ValueError("sets_per_point must be >= 1")
        unknown = set(self.tests) - set(TEST_LABELS)
        if unknown:
            raise ValueError("unknown test(s): %s" % ", ".join(sorted(unknown)))

    def config(self, cap, set_index):
        # set s draws the same task sequence at every cap, so a higher cap only
        # adds tasks or shortens the stretched period: per-set verdicts, and
        # hence the fractions, are monotone in the cap
        ss = np.random.SeedSequence(self.seed, spawn_key=(set_index,))
        return GenConfig(self.processors, self.util_class, self.cp_class, cap,
                         int(ss.generate_state(1, np.uint64)[0]), self.period_range)


class ResultRow(NamedTuple):
    cap: Fraction
    test: str
    accepted: int
    n: int

    @property
    def fraction(self):
        return self.accepted / self.n


def _run_point(grid: ExperimentGrid, cap):
    accepted = {t: 0 for t in grid.tests}
    ordinary_ok = True
    for s in range(grid.sets_per_point):
        try:
            ts, _ = gen_taskset(grid.config(cap, s))
        except GenerationError as exc:
            raise GenerationError("M=%d %s/%s cap=%s set=%d: %s" % (
                grid.processors, grid.util_class, grid.cp_class, cap, s, exc)) from exc
        if "cpgedf" in accepted:
            accepted["cpgedf"] += cpgedf_test(ts).schedulable
        if "cab" in accepted:
            accepted["cab"] += cab_test(ts).schedulable
        if "u-ordinary" in accepted:
            if ts.max_utilization > 1:
                ordinary_ok = False
            elif ordinary_ok:
                accepted["u-ordinary"] += density_test(single_subtask_companion(ts)).schedulable
    rows = [ResultRow(cap, t, a, grid.sets_per_point) for t, a in accepted.items()
            if t != "u-ordinary" or ordinary_ok]
    return rows


def run_experiment(grid: ExperimentGrid):
    """Acceptance counts per (cap, test), sorted by cap then test name.

    The ordinary-task comparison is left out at any cap where a generated DAG
    task has utilization above 1, since no sporadic task can match it.
    """
    if grid.workers > 1:
        with ProcessPoolExecutor(grid.workers) as pool:
            chunks = list(pool.map(_run_point, [grid] * len(grid.caps), grid.caps))
    else:
        chunks = [_run_point(grid, c) for c in grid.caps]
    return sorted((r for rows in chunks for r in rows), key=lambda r: (r.cap, r.test))


def _cap_str(cap):
    return format(float(cap), "g")


def emit_csv(results, path):
    """``cap,test,fraction,n`` rows in canonical order."""
    if not results:
        raise ValueError("no results to write")
    rows = sorted(results, key=lambda r: (r.cap, r.test))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cap", "test", "fraction", "n"])
        for r in rows:
            w.writerow([_cap_str(r.cap), r.test, "%.4f" % r.fraction, r.n])


def read_csv(path):
    with Path(path).open(encoding="utf-8") as fh:
        return [ResultRow(Fraction(row["cap"]), row["test"],
                          round(float(row["fraction"]) * int(row["n"])), int(row["n"]))
                for row in csv.DictReader(fh)]


def emit_svg(results, path, title=None):
    """Single-panel line chart, one line per test."""
    if not results:
        raise ValueError("no results to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = {}
    for r in sorted(results, key=lambda r: (r.test, r.cap)):
        series.setdefault(r.test, ([], []))
        series[r.test][0].append(float(r.cap))
        series[r.test][1].append(r.fraction)
    with matplotlib.rc_context({"svg.hashsalt": "cpgedf", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        markers = iter("os^dvx")
        for test in sorted(series):
            xs, ys = series[test]
            ax.plot(xs, ys, marker=next(markers), markersize=3,
                    label=TEST_LABELS.get(test, test))
        ax.set_xlabel("Utilization cap")
        ax.set_ylabel("Fraction of schedulable task sets")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, linewidth=0.3)
        ax.legend(loc="best")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
