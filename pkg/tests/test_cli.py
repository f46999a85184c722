import json
import os

import pytest

from horolab import cli
from horolab.experiments import REGISTRY

GROUP = """\
group:
  dim: 2
  generators:
    - source: {{center: [-1.0, 0.0], radius: {r}}}
      target: {{center: [1.0, 0.0], radius: {r}}}
    - source: {{center: [0.0, -1.0], radius: {r}}}
      target: {{center: [0.0, 1.0], radius: {r}}}
"""

CHEAP = "experiments: [algebra, busemann, rate-oracle]\n"


def write(tmp_path, body, radius=0.6, name="c.yaml"):
    path = tmp_path / name
    path.write_text("name: small\nseed: 7\n" + GROUP.format(r=radius) + body)
    return str(path)


def run(*args):
    return cli.main([str(a) for a in args])


def test_list_experiments(capsys):
    assert run("list-experiments") == 0
    out = capsys.readouterr().out
    for name in REGISTRY:
        assert name in out
    assert "schottky-n2-standard" in out


def test_validate(tmp_path, capsys):
    assert run("validate", "schottky-n2-standard") == 0
    assert "ok" in capsys.readouterr().out
    assert run("validate", write(tmp_path, "bogus: 1\n")) == 2
    assert "bogus (line" in capsys.readouterr().err


def test_run_passes_and_writes_reports(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("run", write(tmp_path, CHEAP), "--out", out) == 0
    files = sorted(os.listdir(out))
    assert files == ["algebra.tsv", "busemann.tsv", "rate-oracle.tsv", "summary.json"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["seed"] == 7
    assert len({e["config_hash"] for e in summary["experiments"]}) == 1
    assert str(out / "algebra.tsv") in capsys.readouterr().out


def test_verdict_failure_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, "tolerances: {cocycle: 1.0e-30}\nexperiments: [busemann]\n")
    assert run("run", cfg, "--out", tmp_path / "o") == 1
    assert "FAIL busemann: cocycle" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path):
    assert run("run", tmp_path / "nope.yaml") == 2
    assert run("run", write(tmp_path, "experiments: [warp]\n")) == 2
    assert run("run", write(tmp_path, CHEAP), "--seed", "-1") == 2
    assert run("run", write(tmp_path, CHEAP), "--jobs", "0") == 2


def test_overlapping_caps_exit_3(tmp_path, capsys):
    assert run("run", write(tmp_path, CHEAP, radius=1.2), "--out", tmp_path / "o") == 3
    err = capsys.readouterr().err
    assert "target cap of generator 0 and" in err and "overlap" in err
    assert not (tmp_path / "o").exists()


def test_unwritable_output_exits_4(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("run", write(tmp_path, "experiments: [rate-oracle]\n"), "--out", blocker / "sub") == 4
    assert "cannot write reports" in capsys.readouterr().err


def test_empty_experiment_list_writes_summary_only(tmp_path):
    out = tmp_path / "o"
    assert run("run", write(tmp_path, "experiments: []\n"), "--out", out) == 0
    assert os.listdir(out) == ["summary.json"]
    assert json.loads((out / "summary.json").read_text())["experiments"] == []


def test_plots_toggle(tmp_path):
    body = "experiments: [{name: nondivergence, frames: 2, thresholds: 4}, rate-oracle]\n"
    cfg = write(tmp_path, body)
    assert run("run", cfg, "--out", tmp_path / "p") == 0
    assert (tmp_path / "p" / "nondivergence.svg").exists()
    assert run("run", cfg, "--out", tmp_path / "q", "--no-plots") == 0
    assert not [f for f in os.listdir(tmp_path / "q") if f.endswith(".svg")]
    a = (tmp_path / "p" / "nondivergence.svg").read_bytes()
    assert run("run", cfg, "--out", tmp_path / "p") == 0
    assert (tmp_path / "p" / "nondivergence.svg").read_bytes() == a


def tables(directory):
    return {f: (directory / f).read_bytes() for f in sorted(os.listdir(directory)) if f.endswith(".tsv")}


def test_determinism_and_reemit(tmp_path):
    cfg = write(tmp_path, "experiments: [algebra, busemann, {name: shadow, frames: 2}]\n")
    assert run("run", cfg, "--out", tmp_path / "a") == 0
    assert run("run", cfg, "--out", tmp_path / "b", "--jobs", "2") == 0
    assert tables(tmp_path / "a") == tables(tmp_path / "b")
    first = tables(tmp_path / "a")
    assert run("run", cfg, "--out", tmp_path / "a") == 0
    assert tables(tmp_path / "a") == first
    assert run("run", cfg, "--out", tmp_path / "c", "--seed", "8") == 0
    assert tables(tmp_path / "c")["algebra.tsv"] != first["algebra.tsv"]


def test_adding_an_experiment_keeps_other_streams(tmp_path):
    one = write(tmp_path, "experiments: [algebra]\n", name="one.yaml")
    two = write(tmp_path, "experiments: [busemann, algebra]\n", name="two.yaml")
    assert run("run", one, "--out", tmp_path / "a") == 0
    assert run("run", two, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "algebra.tsv").read_bytes() == (tmp_path / "b" / "algebra.tsv").read_bytes()


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("run", write(tmp_path, "experiments: [rate-oracle]\n")) == 0
    assert (tmp_path / "reports" / "small" / "rate-oracle.tsv").exists()


def test_missing_subcommand():
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2
