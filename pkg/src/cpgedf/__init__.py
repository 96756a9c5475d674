"""Sporadic DAG tasks under global EDF with the Lazy-Cpath policy (CP-GEDF):
task model, simulator, schedulability tests and experiment harness."""

from .model import (CriticalPath, DagTask, InvalidTaskError, Subtask, TaskSet,
                    aggregates, cp_utilization, critical_path, validate,
                    validate_taskset)
from .analysis import (TestVerdict, WorkloadBound, cab_test, carryin_bound,
                       cpgedf_test, density_test, eta, workload_bound)

__version__ = "0.1.0"

__all__ = [
    "CriticalPath", "DagTask", "InvalidTaskError", "Subtask", "TaskSet",
    "aggregates", "cp_utilization", "critical_path", "validate", "validate_taskset",
    "TestVerdict", "WorkloadBound", "cab_test", "carryin_bound", "cpgedf_test",
    "density_test", "eta", "workload_bound",
]
