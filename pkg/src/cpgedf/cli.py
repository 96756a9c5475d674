"""``cpgedf`` command line.

Exit codes: 0 success / schedulable, 1 not schedulable (``analyze``),
2 usage or input error, 3 internal fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import analysis
from .experiment import (DEFAULT_TESTS, ExperimentGrid, default_caps, emit_csv,
                         emit_svg, run_experiment)
from .generator import CP_CLASSES, UTIL_CLASSES, GenConfig, gen_taskset
from .io import TaskSetFormatError, dumps, load_taskset
from .model import InvalidTaskError, ensure_valid

EXIT_OK, EXIT_UNSCHEDULABLE, EXIT_USAGE, EXIT_FAULT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load(path):
    try:
        ts = load_taskset(path)
        ensure_valid(ts)
    except OSError as exc:
        raise UsageError("cannot read %s: %s" % (path, exc.strerror or exc)) from exc
    except (TaskSetFormatError, InvalidTaskError) as exc:
        raise UsageError("%s: %s" % (path, exc)) from exc
    return ts


def cmd_analyze(args):
    ts = _load(args.file)
    names = list(analysis.TESTS) if args.test == "all" else [args.test]
    ok = True
    for name in names:
        if name == "cpgedf":
            verdict = analysis.cpgedf_test(ts, lifted=not args.literal)
        else:
            verdict = analysis.TESTS[name](ts)
        ok &= verdict.schedulable
        print(verdict.to_json())
    return EXIT_OK if ok else EXIT_UNSCHEDULABLE


def cmd_simulate(args):
    from .sim import ReleasePattern, simulate
    from .sim import checks
    from .sim.kernels import run_cpgedf

    ts = _load(args.file)
    try:
        pattern = ReleasePattern.parse(args.pattern)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    kernel = run_cpgedf.py_func if args.no_jit else None
    trace = simulate(ts, pattern, horizon=args.horizon, kernel=kernel)
    if args.trace:
        trace.to_jsonl(args.trace)
    summary = {
        "horizon": trace.horizon,
        "horizon_capped": trace.horizon_capped,
        "pattern": pattern.describe(),
        "dag_jobs": trace.n_jobs,
        "completed": int((trace.job_completion >= 0).sum()),
        "deadline_misses": len(trace.misses),
        "first_miss": trace.first_miss,
    }
    status = EXIT_OK
    if args.check_lemmas:
        found = {
            "lemma1": checks.check_lemma1(trace),
            "lemma2": checks.check_lemma2(trace),
            "lemma3": checks.check_lemma3(trace),
            "trace": checks.check_trace_invariants(trace),
            "work_conservation": checks.check_work_conservation(trace),
        }
        summary["violations"] = {k: [v.detail for v in vs] for k, vs in found.items()}
        reports = checks.check_miss_necessary_conditions(trace)
        summary["first_miss_conditions"] = [
            {"task": r.task_id, "job": r.job_index, "deadline": r.deadline,
             "non_executing": r.non_executing, "lemma4": r.lemma4,
             "average_workload": analysis.fraction_str(
                 Fraction(r.workload, r.deadline - r.release)),
             "threshold": analysis.fraction_str(r.threshold), "lemma5": r.lemma5}
            for r in reports]
        if any(found.values()):
            status = EXIT_FAULT
    print(json.dumps(summary, indent=2))
    return status


def cmd_gen(args):
    params = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                params = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError("bad config %s: %s" % (args.config, exc)) from exc
    for key in ("processors", "util_class", "cp_class", "util_cap", "seed", "ticks_per_ms"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    if "util_cap" in params:
        params["util_cap"] = Fraction(str(params["util_cap"]))
    if "period_range" in params:
        params["period_range"] = tuple(params["period_range"])
    try:
        cfg = GenConfig(**params)
    except (TypeError, ValueError) as exc:
        raise UsageError("bad generator config: %s" % exc) from exc
    ts, metadata = gen_taskset(cfg)
    text = dumps(ts, metadata, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args):
    sets = 1000 if args.full_scale else args.sets
    try:
        grid = ExperimentGrid(
            processors=args.m, util_class=args.util, cp_class=args.cp,
            caps=default_caps(args.m, Fraction(args.step)), sets_per_point=sets,
            tests=tuple(args.tests.split(",")), seed=args.seed, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    results = run_experiment(grid)
    if args.csv:
        emit_csv(results, args.csv)
    else:
        print("cap,test,fraction,n")
        for r in results:
            print("%s,%s,%.4f,%d" % (format(float(r.cap), "g"), r.test, r.fraction, r.n))
    if args.svg:
        emit_svg(results, args.svg,
                 title="M=%d, %s utilization, %s critical path" % (args.m, args.util, args.cp))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="cpgedf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run schedulability tests on a task-set file")
    a.add_argument("file")
    a.add_argument("--test", choices=[*analysis.TESTS, "all"], default="all")
    a.add_argument("--literal", action="store_true",
                   help="evaluate the CP-GEDF condition at sigma_k only")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate CP-GEDF on a task-set file")
    s.add_argument("file")
    s.add_argument("--horizon", type=int, help="ticks (default 2*lcm of periods, capped)")
    s.add_argument("--pattern", default="sync", help="sync or jitter:SEED:MAX")
    s.add_argument("--check-lemmas", action="store_true")
    s.add_argument("--trace", metavar="OUT.jsonl")
    s.add_argument("--no-jit", action="store_true", help="use the interpreted tick loop")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gen", help="generate a random DAG task set")
    g.add_argument("--config", help="JSON object with GenConfig fields")
    g.add_argument("--m", dest="processors", type=int)
    g.add_argument("--util", dest="util_class", choices=list(UTIL_CLASSES))
    g.add_argument("--cp", dest="cp_class", choices=list(CP_CLASSES))
    g.add_argument("--cap", dest="util_cap", help="total utilization, e.g. 3.5 or 7/2")
    g.add_argument("--seed", type=int)
    g.add_argument("--ticks-per-ms", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("experiment", help="acceptance ratio versus utilization cap")
    e.add_argument("--m", type=int, choices=[8, 16], default=8)
    e.add_argument("--util", choices=list(UTIL_CLASSES), default="medium")
    e.add_argument("--cp", choices=list(CP_CLASSES), default="short")
    e.add_argument("--sets", type=int, default=100, help="task sets per cap (default 100)")
    e.add_argument("--full-scale", action="store_true", help="1000 sets per cap")
    e.add_argument("--step", default="0.1", help="cap increment")
    e.add_argument("--tests", default=",".join(DEFAULT_TESTS))
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--csv")
    e.add_argument("--svg")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print("cpgedf: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print("cpgedf: I/O error: %s" % exc, file=sys.stderr)
        return EXIT_FAULT
    except Exception as exc:  # noqa: BLE001 - report and map to the fault code
        print("cpgedf: internal error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
