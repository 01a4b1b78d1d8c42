import json

import pytest

from keyflood import cli, traceio
from keyflood.generate import ExperimentConfig


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_every_config_field_has_a_flag():
    parser = cli.build_parser()
    for verb in ("generate", "run", "verify", "bench"):
        sub = parser._subparsers._group_actions[0].choices[verb]
        dests = {a.dest for a in sub._actions}
        assert set(ExperimentConfig.field_names()) <= dests, verb


def test_generate_writes_network(tmp_path, capsys):
    assert run_cli("generate", "--topology", "path", "--n", 3, "--explicit-ids", "10,0,11",
                   "--shuffle-links", "false", "--out-dir", tmp_path) == 0
    files = list(tmp_path.glob("network-*.json"))
    assert len(files) == 1
    data = json.loads(files[0].read_text())
    assert data == {"ids": ["10", "0", "11"], "links": [[1], [0, 2], [1]]}


def test_env_var_sets_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run_cli("generate", "--n", 4, "--seed", 2) == 0
    assert list((tmp_path / "env").glob("network-*.json"))


def test_config_file_then_flags(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[experiment]\ntopology = star\nn = 7\nseed = 5\nshuffle-links = no\n")
    args = cli.build_parser().parse_args(["generate", "--config", str(ini), "--n", "9"])
    cfg = cli.build_config(args)
    assert (cfg.topology, cfg.n, cfg.seed, cfg.shuffle_links) == ("star", 9, 5, False)


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\ncolour = blue\n")
    assert run_cli("generate", "--config", bad) == 2
    assert run_cli("generate", "--config", tmp_path / "missing.ini") == 2
    assert run_cli("generate", "--n", 0) == 2


def test_run_export_verify(tmp_path, capsys):
    out = tmp_path / "o"
    assert run_cli("run", "--topology", "path", "--explicit-ids", "10,0,11",
                   "--variant", "processor_terminating", "--out-dir", out) == 0
    trace_file = next(out.glob("trace-*.jsonl"))
    assert (out / "runs.csv").exists()
    assert list(out.glob("*-delays.png"))
    rows = traceio.read_csv(out / "runs.csv")
    assert rows[0]["min_id"] == "0"

    dot = tmp_path / "tree.dot"
    assert run_cli("export", trace_file, "--format", "dot", "-o", dot) == 0
    assert dot.read_text().count(" -> ") == 2
    assert run_cli("export", trace_file, "--format", "csv", "-o", tmp_path / "n.csv") == 0
    assert len(traceio.read_csv(tmp_path / "n.csv")) == 3
    copy = tmp_path / "copy.jsonl"
    assert run_cli("export", trace_file, "--format", "jsonl", "-o", copy) == 0
    assert copy.read_text() == trace_file.read_text()

    assert run_cli("verify", "--trace", trace_file) == 0
    assert "0 violations" in capsys.readouterr().out


def test_run_from_network_file(tmp_path):
    run_cli("generate", "--topology", "cycle", "--n", 5, "--out-dir", tmp_path)
    net_file = next(tmp_path.glob("network-*.json"))
    assert run_cli("run", "--network", net_file, "--compact", "--no-plots",
                   "--out-dir", tmp_path / "r") == 0
    assert traceio.read_csv(tmp_path / "r" / "runs.csv")[0]["n"] == "5"


def test_verify_batch_writes_reports(tmp_path):
    out = tmp_path / "v"
    code = run_cli("verify", "--topology", "grid", "--n", 9, "--repetitions", 2,
                   "--variant", "baseline", "--out-dir", out)
    assert code == 0
    assert (out / "verify.csv").exists() and (out / "verify.png").exists()
    assert (out / "violations.txt").read_text() == ""


def test_verify_fails_on_corrupted_trace(tmp_path, capsys):
    run_cli("run", "--topology", "path", "--n", 4, "--no-plots", "--out-dir", tmp_path)
    trace_file = next(tmp_path.glob("trace-*.jsonl"))
    lines = trace_file.read_text().splitlines()
    lines[3] = lines[3].replace('"candidate":"1', '"candidate":"0', 1)
    trace_file.write_text("\n".join(lines) + "\n")
    assert run_cli("verify", "--trace", trace_file) == 1
    assert "round 3" in capsys.readouterr().out


def test_small_bench(tmp_path, capsys):
    code = run_cli("bench", "--diameters", 2, 4, "--key-targets", 16, 64, "--out-dir", tmp_path)
    assert code == 0
    rows = traceio.read_csv(tmp_path / "bench.csv")
    assert len(rows) == 4 + 2
    assert (tmp_path / "bench.png").exists()
    assert "separation: ok" in capsys.readouterr().out
