"""
Command line tests: exit codes and the files each command writes
"""

import json

import pytest

from app.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from app.services.trace import read_trace


def _out(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_writes_a_trace(tmp_path, capsys):
    trace = tmp_path / "fig8_{seed}.jsonl"
    assert main(["run", "fig8_toy", "--trace", str(trace), "--seed", "2"]) == EXIT_OK
    summary = _out(capsys)
    assert summary[0]["ok"]
    assert summary[0]["finished"] == {"plant": True}
    header, events = read_trace(tmp_path / "fig8_2.jsonl")
    assert header.seed == 2
    assert events


def test_run_sweep_and_report(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["run", "fig8_toy", "--sweep", "3", "--report", str(report)]) == EXIT_OK
    assert [r["seed"] for r in _out(capsys)] == [0, 1, 2]
    assert len(json.loads(report.read_text())) == 3


def test_run_into_the_island_fails(capsys):
    assert main(["run", "boat", "--x0", "88", "0"]) == EXIT_FAILED
    assert not _out(capsys)[0]["ok"]


def test_x0_dimension_is_a_usage_error():
    assert main(["run", "boat", "--x0", "88"]) == EXIT_USAGE


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: bad\nstate: {axes: [x]}\n")
    assert main(["run", str(bad)]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_unparseable_yaml(tmp_path):
    bad = tmp_path / "broken.yaml"
    bad.write_text("name: [unclosed\n")
    assert main(["verify", str(bad)]) == EXIT_USAGE


def test_missing_scenario():
    assert main(["run", "no_such_scenario"]) == EXIT_USAGE


def test_verify_writes_report_and_graph(tmp_path, capsys):
    report = tmp_path / "fig8_verify.json"
    graph = tmp_path / "fig8.graphml"
    assert main(["verify", "fig8_toy", "--report", str(report), "--graph", str(graph)]) == EXIT_OK
    assert _out(capsys)["verified"]
    assert json.loads(report.read_text())["vertices_visited"] == 7
    assert graph.exists()


@pytest.mark.parametrize(
    "args, code",
    [
        (["lee", "static_toy"], EXIT_OK),
        (["lee", "linear_toy"], EXIT_OK),
        (["lee", "linear_toy", "--eta", "0.01"], EXIT_FAILED),
        (["lee", "static_toy", "--samples", "0"], EXIT_USAGE),
        (["lee", "static_toy", "--eta", "0"], EXIT_USAGE),
        (["lee", "linear_toy", "--lambda", "0"], EXIT_USAGE),
    ],
)
def test_lee_exit_codes(args, code):
    assert main(args) == code


def test_lee_prints_the_empirical_label(capsys):
    main(["lee", "static_toy", "--mode", "Run"])
    report = _out(capsys)
    assert report["label"].startswith("empirical")
    assert report["verdict"]


def test_predict_writes_segments(tmp_path, capsys):
    trace = tmp_path / "predict.jsonl"
    assert main(["predict", "static_toy", "--steps", "5", "--trace", str(trace)]) == EXIT_OK
    assert _out(capsys)["segments"] == 5
    _, events = read_trace(trace)
    assert len([e for e in events if e.kind == "segment"]) == 5


def test_trace_export(tmp_path, capsys):
    trace = tmp_path / "run.jsonl"
    main(["run", "fig8_toy", "--trace", str(trace)])
    capsys.readouterr()
    out = tmp_path / "run.csv"
    assert main(["trace-export", str(trace), "--out", str(out)]) == EXIT_OK
    rows = _out(capsys)["rows"]
    assert rows > 0
    assert len(out.read_text().splitlines()) == rows + 1


def test_trace_export_of_a_missing_file(tmp_path):
    assert main(["trace-export", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_no_command():
    assert main([]) == EXIT_USAGE
