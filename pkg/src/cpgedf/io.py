"""Task-set JSON format.

``{"processors": M, "tasks": [{"id", "period", "subtasks": [{"index", "wcet"}],
"edges": [[pred, succ], ...]}]}``. Deadlines are implied equal to periods.
Unknown fields are rejected; a top-level ``metadata`` object is carried
through untouched (the generator writes one).
"""

import hashlib
import json
from pathlib import Path

from .model import DagTask, Subtask, TaskSet


class TaskSetFormatError(ValueError):
    pass


_TOP = {"processors", "tasks", "metadata"}
_TASK = {"id", "period", "subtasks", "edges"}
_SUB = {"index", "wcet"}


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise TaskSetFormatError("%s must be an integer, got %r" % (where, value))
    return value


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise TaskSetFormatError("%s must be an object" % where)
    unknown = set(obj) - allowed
    if unknown:
        raise TaskSetFormatError("unknown field(s) in %s: %s"
                                 % (where, ", ".join(sorted(unknown))))
    missing = required - set(obj)
    if missing:
        raise TaskSetFormatError("missing field(s) in %s: %s"
                                 % (where, ", ".join(sorted(missing))))


def taskset_from_dict(data):
    """Parse a decoded JSON document; returns ``(TaskSet, metadata or None)``."""
    _check_keys(data, _TOP, {"processors", "tasks"}, "task set")
    if not isinstance(data["tasks"], list):
        raise TaskSetFormatError("tasks must be a list")
    tasks = []
    for n, t in enumerate(data["tasks"]):
        where = "tasks[%d]" % n
        _check_keys(t, _TASK, _TASK, where)
        subs = []
        for m, s in enumerate(t["subtasks"]):
            sw = "%s.subtasks[%d]" % (where, m)
            _check_keys(s, _SUB, _SUB, sw)
            subs.append(Subtask(_int(s["index"], sw + ".index"),
                                _int(s["wcet"], sw + ".wcet")))
        edges = []
        for m, e in enumerate(t["edges"]):
            if not isinstance(e, list) or len(e) != 2:
                raise TaskSetFormatError("%s.edges[%d] must be [pred, succ]"
                                         % (where, m))
            edges.append((_int(e[0], "edge"), _int(e[1], "edge")))
        tasks.append(DagTask(id=_int(t["id"], where + ".id"),
                             subtasks=tuple(subs), edges=tuple(edges),
                             period=_int(t["period"], where + ".period")))
    ts = TaskSet(tuple(tasks), _int(data["processors"], "processors"))
    return ts, data.get("metadata")


def taskset_to_dict(ts, metadata=None):
    doc = {
        "processors": ts.processors,
        "tasks": [
            {
                "id": t.id,
                "period": t.period,
                "subtasks": [{"index": s.index, "wcet": s.wcet}
                             for s in t.subtasks],
                "edges": [[a, b] for a, b in t.edges],
            }
            for t in ts.tasks
        ],
    }
    if metadata is not None:
        doc["metadata"] = metadata
    return doc


def dumps(ts, metadata=None, indent=None):
    return json.dumps(taskset_to_dict(ts, metadata), indent=indent)


def loads(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskSetFormatError("not valid JSON: %s" % exc) from exc
    return taskset_from_dict(data)


def load_taskset(path):
    """Read a task-set file; returns the ``TaskSet`` only."""
    return loads(Path(path).read_text(encoding="utf-8"))[0]


def save_taskset(ts, path, metadata=None):
    Path(path).write_text(dumps(ts, metadata, indent=2) + "\n", encoding="utf-8")


def taskset_hash(ts):
    """SHA-256 over the canonical JSON encoding (metadata excluded)."""
    canon = json.dumps(taskset_to_dict(ts), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
