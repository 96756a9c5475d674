"""CP-GEDF simulation and trace checkers."""

from .engine import (HORIZON_CAP, ReleasePattern, ScheduleTrace, SimulationError,
                     default_horizon, priority_key, runs, simulate)
from .checks import (CpInterval, LemmaViolation, MissReport, WindowDiagnostics,
                     busy_intervals, check_lemma1, check_lemma2, check_lemma3,
                     check_miss_necessary_conditions, check_trace_invariants,
                     check_work_conservation, classify_cp_intervals)

__all__ = [
    "HORIZON_CAP", "ReleasePattern", "ScheduleTrace", "SimulationError",
    "default_horizon", "priority_key", "runs", "simulate",
    "CpInterval", "LemmaViolation", "MissReport", "WindowDiagnostics",
    "busy_intervals", "check_lemma1", "check_lemma2", "check_lemma3",
    "check_miss_necessary_conditions", "check_trace_invariants",
    "check_work_conservation", "classify_cp_intervals",
]
