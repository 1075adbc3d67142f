import csv
import hashlib
import json
import os

import pytest

from argotune.cli import ConfigError, RunConfig, main, read_config_file, summarize, write_config_file
from argotune.config_space import Configuration
from argotune.traces import TraceRecord, read_trace, strip_timestamps, write_trace

TUNE = ["tune", "--workload", "synthetic", "--algo", "bo", "--n-search", "20", "--epochs", "25",
        "--cores", "112", "--seed", "3"]
TRAIN = ["train", "--workload", "gnn", "--nodes", "300", "--edge-prob", "0.02", "--fanouts", "4,3",
         "--shadow-fanouts", "3,2", "--batch-size", "32", "--epochs", "2", "--deterministic", "--cores", "8"]


def test_tune_writes_trace(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    assert main(TUNE + ["--out", str(out)]) == 0
    recs = read_trace(out)
    assert sum(r.phase == "search" for r in recs) == 20 and len(recs) == 25
    text = capsys.readouterr().out
    assert "best configuration: n=" in text and "searches: 20" in text


@pytest.mark.parametrize("algo", ["bo", "sa", "exhaustive", "default"])
def test_tune_is_deterministic(tmp_path, algo):
    paths = [tmp_path / f"{i}.jsonl" for i in range(2)]
    args = ["tune", "--workload", "synthetic", "--algo", algo, "--n-search", "10", "--epochs", "12",
            "--cores", "16", "--seed", "5", "--noise", "0.5"]
    for p in paths:
        assert main(args + ["--out", str(p)]) == 0
    a, b = (strip_timestamps(p.read_text()) for p in paths)
    assert a == b and a


def test_search_subcommand_is_exhaustive(tmp_path):
    out = tmp_path / "e.jsonl"
    assert main(["search", "--workload", "synthetic", "--cores", "8", "--out", str(out)]) == 0
    assert len(read_trace(out)) == 36


@pytest.mark.parametrize("extra", [
    ["--epochs", "5", "--n-search", "10"],
    ["--preset", "no-such-preset"],
    ["--graph", "/nonexistent/graph.txt"],
])
def test_tune_config_errors(extra, capsys):
    assert main(["tune", "--workload", "synthetic", "--cores", "16"] + extra) == 2
    assert "error" in capsys.readouterr().err


def test_bad_flag_value_exits_2():
    assert main(["tune", "--algo", "grid"]) == 2


def test_config_file_round_trip(tmp_path):
    cfg = RunConfig(workload="gnn", fanouts=(5, 4), epochs=7, seed=9, deterministic=True, fixed=(1, 2, 3))
    path = tmp_path / "run.cfg"
    write_config_file(cfg, path)
    assert RunConfig.from_mapping(read_config_file(path)) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"colour": "blue"})


def test_config_file_drives_tune(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# tuning run\nworkload = synthetic\nalgo = sa\nn_search = 8\nepochs = 8\ncores = 16\n")
    out = tmp_path / "t.jsonl"
    assert main(["tune", "--config", str(path), "--out", str(out)]) == 0
    assert len(read_trace(out)) == 8


def test_train_csv_and_invariance(tmp_path):
    columns = []
    for fixed in ("1,1,1", "2,1,1"):
        out = tmp_path / f"m{fixed[0]}.csv"
        assert main(TRAIN + ["--fixed", fixed, "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [r["epoch"] for r in rows] == ["0", "1"]
        columns.append([float(r["loss"]) for r in rows])
    for a, b in zip(*columns):
        assert abs(a - b) <= 1e-9 * abs(a)


def test_train_errors(tmp_path):
    assert main(TRAIN + ["--fixed", "4,2,2"]) == 2
    assert main(TRAIN + ["--graph", str(tmp_path / "missing.txt")]) == 2
    assert main(TRAIN[:1] + ["--workload", "synthetic"]) == 2


def test_train_from_graph_file(tmp_path):
    graph = tmp_path / "g.txt"
    assert main(["gen-graph", "--nodes", "120", "--param", "0.05", "--seed", "1", "--out", str(graph)]) == 0
    out = tmp_path / "m.csv"
    assert main(TRAIN + ["--graph", str(graph), "--fixed", "1,1,1", "--out", str(out)]) == 0
    assert len(list(csv.DictReader(out.open()))) == 2


def _fixture(tmp_path):
    recs = [TraceRecord(0, Configuration(1, 1, 1), 12.0, 12.0, "search", "a"),
            TraceRecord(1, Configuration(2, 1, 1), 10.0, 10.0, "search", "b"),
            TraceRecord(2, Configuration(2, 2, 1), 15.0, 10.0, "reuse", "c")]
    ex = [TraceRecord(0, Configuration(4, 1, 1), 9.0, 9.0, "search", "d"),
          TraceRecord(1, Configuration(1, 1, 1), 12.0, 9.0, "search", "e")]
    write_trace(recs, tmp_path / "t.jsonl")
    write_trace(ex, tmp_path / "e.jsonl")
    return recs, ex


def test_report_ratio(tmp_path, capsys):
    recs, ex = _fixture(tmp_path)
    csv_out = tmp_path / "r.csv"
    assert main(["report", str(tmp_path / "t.jsonl"), "--exhaustive", str(tmp_path / "e.jsonl"),
                 "--out", str(csv_out)]) == 0
    text = capsys.readouterr().out
    assert "ratio (exhaustive best / best found): 0.90" in text and "searches: 2" in text
    rows = list(csv.DictReader(csv_out.open()))
    assert [float(r["ratio"]) for r in rows] == [9 / 12, 9 / 10, 9 / 15]
    assert summarize(recs, ex)["ratio"] == pytest.approx(0.9)


def test_report_round_trips_tune(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    main(TUNE + ["--out", str(out)])
    tune_text = capsys.readouterr().out.splitlines()
    assert main(["report", str(out)]) == 0
    assert capsys.readouterr().out.splitlines() == tune_text


def test_report_errors(tmp_path, capsys):
    _fixture(tmp_path)
    bad = tmp_path / "bad.jsonl"
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    bad.write_text("\n".join([lines[0], lines[1], "{oops"]) + "\n")
    assert main(["report", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["report", str(empty)]) == 1
    assert main(["report", str(tmp_path / "nope.jsonl")]) == 1


def test_gen_graph_files(tmp_path):
    digests = []
    for name in ("a.txt", "b.txt"):
        path = tmp_path / name
        assert main(["gen-graph", "--nodes", "100", "--param", "0.05", "--seed", "7", "--out", str(path)]) == 0
        digests.append([hashlib.sha256(p.read_bytes()).hexdigest() for p in (path, tmp_path / (name + ".feat"))])
    assert digests[0] == digests[1]
    full = tmp_path / "k.txt"
    assert main(["gen-graph", "--nodes", "25", "--param", "1", "--out", str(full)]) == 0
    assert len(full.read_text().splitlines()) == 25 * 24 // 2


def test_gen_graph_unwritable(tmp_path):
    assert main(["gen-graph", "--out", str(tmp_path / "missing" / "dir" / "g.txt")]) == 1


def test_bench_skips_on_small_hosts(capsys):
    if len(os.sched_getaffinity(0)) >= 8:
        pytest.skip("host is large enough to run the bench")
    assert main(["bench", "--workload", "gnn"]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "skipped"
