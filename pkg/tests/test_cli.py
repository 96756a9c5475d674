import json

import pytest

from conftest import lazy_preempt_task
from cpgedf.cli import main
from cpgedf.io import save_taskset
from cpgedf.model import DagTask, TaskSet


@pytest.fixture
def lazy_file(tmp_path):
    path = tmp_path / "lazy_preempt.json"
    save_taskset(TaskSet([lazy_preempt_task()], 2), path)
    return str(path)


@pytest.fixture
def overload_file(tmp_path):
    path = tmp_path / "over.json"
    save_taskset(TaskSet([DagTask.from_wcets(i, [8], (), 10) for i in (1, 2, 3)], 2), path)
    return str(path)


def test_analyze_schedulable(lazy_file, capsys):
    assert main(["analyze", lazy_file, "--test", "cpgedf"]) == 0
    assert json.loads(capsys.readouterr().out)["schedulable"] is True
    # all tests must pass; the cp bound of CAB rejects sigma = 0.7 at M = 2
    assert main(["analyze", lazy_file]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(l)["test"] for l in lines] == ["cpgedf", "density", "cab"]


def test_analyze_not_schedulable(overload_file, capsys):
    assert main(["analyze", overload_file, "--test", "cpgedf"]) == 1
    assert json.loads(capsys.readouterr().out)["schedulable"] is False


def test_usage_errors(tmp_path, lazy_file, capsys):
    assert main(["analyze", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"processors": 1, "tasks": [], "x": 0}')
    assert main(["analyze", str(bad)]) == 2
    assert main(["simulate", lazy_file, "--pattern", "poisson"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze"])
    assert exc.value.code == 2
    assert "error" in capsys.readouterr().err


def test_invalid_task_is_usage_error(tmp_path):
    path = tmp_path / "long.json"
    save_taskset(TaskSet([DagTask.from_wcets(1, [10, 15], [(1, 2)], 20)], 1), path)
    assert main(["analyze", str(path)]) == 2


def test_simulate_with_checks_and_trace(lazy_file, tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    assert main(["simulate", lazy_file, "--check-lemmas", "--trace", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["deadline_misses"] == 0
    assert not any(summary["violations"].values())
    assert len(out.read_text().splitlines()) == summary["horizon"] + 1


def test_simulate_reports_miss_conditions(overload_file, capsys):
    assert main(["simulate", overload_file, "--check-lemmas", "--no-jit"]) == 0
    summary = json.loads(capsys.readouterr().out)
    (cond,) = summary["first_miss_conditions"]
    assert cond["lemma4"] and cond["lemma5"] and cond["average_workload"] == "9/5"


def test_gen_to_file_and_stdout(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["gen", "--m", "4", "--util", "light", "--cap", "3/2", "--seed", "2",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["processors"] == 4 and doc["metadata"]["config"]["util_cap"] == "3/2"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"processors": 2, "util_cap": "1", "seed": 5}))
    assert main(["gen", "--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["processors"] == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["gen", "--config", str(cfg)]) == 2


def test_experiment_outputs(tmp_path, capsys):
    csv_path, svg_path = tmp_path / "r.csv", tmp_path / "r.svg"
    assert main(["experiment", "--sets", "3", "--step", "2", "--csv", str(csv_path),
                 "--svg", str(svg_path)]) == 0
    assert csv_path.read_text().startswith("cap,test,fraction,n\n2,cab,")
    assert svg_path.read_text().lstrip().startswith("<?xml")
    capsys.readouterr()
    assert main(["experiment", "--sets", "2", "--step", "1/2", "--tests", "cpgedf"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "cap,test,fraction,n" and len(lines) == 17
    assert lines[1] == "0.5,cpgedf,1.0000,2" and lines[-1] == "8,cpgedf,0.0000,2"


def test_experiment_io_fault(tmp_path):
    assert main(["experiment", "--sets", "1", "--step", "4",
                 "--csv", str(tmp_path / "no" / "r.csv")]) == 3
