import json

import numpy as np

from horolab.experiments import REGISTRY, Context, ExperimentReport, inversions, run_experiment
from horolab.report import write_reports


def test_registry_covers_every_criterion():
    assert {e.criterion for e in REGISTRY.values()} == set(range(1, 10))
    assert len(REGISTRY) == 16


def test_inversions():
    assert inversions([5, 4, 3, 2]) == 0
    assert inversions([5, 6, 3, 3]) == 2


def test_table_text_roundtrips_floats():
    rep = ExperimentReport("x", "h", 1, ["a", "b", "c"], [(0.1 + 0.2, np.int64(3), True)], {"ok": True})
    text = rep.table_text()
    assert text == "a\tb\tc\n0.30000000000000004\t3\t1\n"
    assert float(text.splitlines()[1].split("\t")[0]) == 0.1 + 0.2


def test_streams_depend_on_name_and_seed(standard_cfg):
    a, b = Context(standard_cfg), Context(dict(standard_cfg, seed=standard_cfg["seed"] + 1))
    assert a.int_seed("algebra") == Context(standard_cfg).int_seed("algebra")
    assert a.int_seed("algebra") != a.int_seed("busemann")
    assert a.int_seed("algebra") != b.int_seed("algebra")


def test_report_writing(ctx, tmp_path):
    reps = [run_experiment(ctx, {"name": "rate-oracle", **REGISTRY["rate-oracle"].defaults}, "abc")]
    paths = write_reports(reps, tmp_path, {"config": "t"}, plots=True)
    assert [p.name for p in paths] == ["rate-oracle.tsv", "summary.json"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["experiments"][0]["config_hash"] == "abc"
    before = (tmp_path / "rate-oracle.tsv").read_bytes()
    write_reports(reps, tmp_path, {"config": "t"}, plots=True)
    assert (tmp_path / "rate-oracle.tsv").read_bytes() == before
