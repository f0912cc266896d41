from __future__ import annotations

import json
import subprocess
import sys

import pytest

from dcadc.cli import main
from dcadc.dc import write_trace

from conftest import build_fig2


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_monitor_bundled_defaults(capsys):
    code, out, _ = run(capsys, "monitor")
    assert code == 0
    assert "FALSE" not in out and out.count("true") >= 5


def test_monitor_subinterval_and_json(capsys):
    code, out, _ = run(capsys, "monitor", "--interval", "5", "6", "--formula", "F2", "--format", "json")
    assert code == 0
    assert json.loads(out) == [{"formula": "F2", "holds": True, "interval": [5, 6]}]


def test_monitor_corrupted_trace_fails(capsys, tmp_path):
    fig2 = build_fig2()
    segs = list(fig2.segments)
    segs[5] = (5, {**segs[5][1], "E1": 1})  # E5 overlapping E1
    bad = type(fig2)(fig2.schema, fig2.horizon, tuple(segs))
    path = tmp_path / "bad.trace.jsonl"
    with open(path, "w") as fh:
        write_trace(bad, fh)
    from importlib import resources

    spec = resources.files("dcadc.dc").joinpath("data", "paper.dcspec")
    code, out, _ = run(capsys, "monitor", str(spec), str(path), "--formula", "F2", "--interval", "5", "6")
    assert code == 1 and "FALSE" in out


def test_monitor_usage_errors(capsys):
    assert run(capsys, "monitor", "--formula", "Nope")[0] == 2
    assert run(capsys, "monitor", "--set", "b")[0] == 2
    assert run(capsys, "monitor", "--set", "b=x")[0] == 2
    assert run(capsys, "monitor", "nonexistent.dcspec")[0] == 2


def test_monitor_bindings_change_verdict(capsys):
    code, out, _ = run(capsys, "monitor", "--formula", "OfflineDeadline", "--set", "b=6")
    assert code == 1 and "FALSE" in out


def test_simulate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(capsys, "simulate", "--iterations", "30", "--seed", "4", "-o", str(a))[0] == 0
    assert run(capsys, "simulate", "--iterations", "30", "--seed", "4", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.labels.jsonl").exists()
    c = tmp_path / "c.jsonl"
    run(capsys, "simulate", "--iterations", "30", "--seed", "5", "-o", str(c))
    assert a.read_bytes() != c.read_bytes()


def test_simulate_zero_iterations_is_header_only(capsys, tmp_path):
    p = tmp_path / "z.jsonl"
    assert run(capsys, "simulate", "--iterations", "0", "-o", str(p))[0] == 0
    lines = p.read_text().splitlines()
    assert len(lines) == 1 and "stream" in json.loads(lines[0])


def test_detect_offline_and_segmented_agree(capsys, tmp_path):
    p = tmp_path / "s.jsonl"
    run(capsys, "simulate", "--iterations", "60", "-o", str(p))
    code, out, _ = run(capsys, "detect", str(p), "--format", "json")
    assert code == 0
    offline = json.loads(out)
    code, out, _ = run(capsys, "detect", str(p), "--by-count", "5", "--format", "json")
    segmented = json.loads(out)
    assert code == 0 and segmented["mode"] == "segmented"
    assert segmented["final"] == offline["final"] and offline["final"]
    assert len(segmented["segments"]) >= 2
    code, out, _ = run(capsys, "detect", str(p), "--by-time", "10")
    assert code == 0 and out.startswith("segment") and "final" in out


def test_detect_empty_and_bad_input(capsys, tmp_path):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    code, out, _ = run(capsys, "detect", str(empty))
    assert code == 0 and out.split() == ["type", "mature", "total", "mcav", "anomalous"]
    bad = tmp_path / "b.jsonl"
    bad.write_text('{"timestamp": 0, "kind": "signal"}\n')
    code, _, err = run(capsys, "detect", str(bad))
    assert code == 2 and "record 1" in err
    assert run(capsys, "detect", str(tmp_path / "missing.jsonl"))[0] == 2


def test_detect_csv(capsys, tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,kind,pamp,danger,safe,type,id\n"
                 "0,signal,1,2,0,,\n0,antigen,,,,x,a1\n")
    code, out, _ = run(capsys, "detect", str(p), "--format", "json")
    assert code == 0 and json.loads(out)["final"] == []  # one iteration cannot mature a cell
    p.write_text("time,kind\n")
    assert run(capsys, "detect", str(p))[0] == 2


def test_trace_command_writes_monitorable_traces(capsys, tmp_path):
    s, t = tmp_path / "s.jsonl", tmp_path / "t.jsonl"
    run(capsys, "simulate", "--iterations", "40", "-o", str(s))
    assert run(capsys, "trace", str(s), "-o", str(t))[0] == 0
    from importlib import resources
    spec = resources.files("dcadc.dc").joinpath("data", "paper.dcspec")
    code, out, _ = run(capsys, "monitor", str(spec), str(t), "--cell", "0", "--formula", "EncI", "--formula", "EncM")
    assert code == 0 and out.startswith("cell 0")
    assert run(capsys, "trace", str(s), "--iteration-ticks", "2")[0] == 1


def test_config_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "config", "--print-defaults")
    defaults = json.loads(out)
    assert code == 0 and defaults["population"]["cell_count"] == 10
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"seed": 3, "analysis": {"by_count": 7}}))
    assert run(capsys, "config", "--check", str(good))[0] == 0
    for doc in ({"nope": 1}, {"cell": {"nope": 1}}, {"analysis": {"tau": 2}}, {"durations": {"l1": 0}}):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run(capsys, "config", "--check", str(bad))[0] == 2
    (tmp_path / "broken.json").write_text("{")
    assert run(capsys, "config", "--check", str(tmp_path / "broken.json"))[0] == 2


def test_theorem1_command(capsys):
    code, out, _ = run(capsys, "theorem1", "--runs", "0", "--format", "json")
    assert code == 0 and json.loads(out)["runs"] == 0
    code, out, _ = run(capsys, "theorem1", "--runs", "5", "--violate", "des1")
    assert code == 0 and "Des1 holds 0/5" in out


def test_bench_command(capsys):
    code, out, _ = run(capsys, "bench", "--m")
    assert code == 0 and out.splitlines()[0].split()[0] == "m"
    code, out, _ = run(capsys, "bench", "--m", "20", "40", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2 and doc["fit"] is not None


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["detect", "--by-count", "3", "--by-time", "1"])
    assert exc.value.code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dcadc.cli", "monitor", "--formula", "F2", "--interval", "5", "6"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "F2" in proc.stdout
