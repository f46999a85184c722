import pytest
import yaml

from horolab import config as config_mod
from horolab.errors import InvalidConfig
from horolab.experiments import REGISTRY

GROUP = """\
group:
  dim: 2
  generators:
    - source: {center: [-1.0, 0.0], radius: 0.6}
      target: {center: [1.0, 0.0], radius: 0.6}
    - source: {center: [0.0, -1.0], radius: 0.6}
      target: {center: [0.0, 1.0], radius: 0.6}
"""


def parse(text):
    return config_mod.validate(yaml.safe_load(text), text)


def test_bundled_config_is_valid(standard_cfg):
    assert standard_cfg["name"] == "schottky-n2-standard"
    names = [e["name"] for e in standard_cfg["experiments"]]
    assert sorted(names) == sorted(REGISTRY)
    assert "schottky-n2-standard" in config_mod.bundled_configs()


def test_defaults_are_filled():
    cfg = parse("name: x\n" + GROUP + "experiments: [algebra, {name: window-ps, T_grid: [2, 4, 8]}]\n")
    assert cfg["seed"] == 0 and cfg["density"]["L"] == 8
    assert cfg["tolerances"]["cocycle"] == 1e-8
    assert cfg["experiments"][1]["T_grid"] == [2, 4, 8]
    assert cfg["experiments"][0]["samples"] == REGISTRY["algebra"].defaults["samples"]


@pytest.mark.parametrize("snippet, fragment", [
    ("colour: red\n", "colour (line 2)"),
    ("density: {L: 8, Lmax: 3}\n", "density.Lmax (line 2)"),
    ("density: {L: -2}\n", "density.L"),
    ("seed: -4\n", "seed"),
    ("tolerances: {sigma: 0}\n", "tolerances.sigma"),
    ("experiments: [teleport]\n", "unknown experiment"),
    ("experiments: [algebra, algebra]\n", "listed twice"),
    ("experiments: [{name: window-ps, T_grid: fast}]\n", "experiments.0.T_grid"),
    ("experiments: [{name: mixing, speed: 3}]\n", "unknown parameter"),
])
def test_rejections_name_field_and_line(snippet, fragment):
    with pytest.raises(InvalidConfig) as info:
        parse("name: x\n" + snippet + GROUP)
    assert fragment in str(info.value)


def test_group_rejections():
    with pytest.raises(InvalidConfig, match="group.dim"):
        parse("name: x\n" + GROUP.replace("dim: 2", "dim: 5"))
    with pytest.raises(InvalidConfig, match=r"generators.0.source.center \(line 5\)"):
        parse("name: x\n" + GROUP.replace("[-1.0, 0.0]", "[-1.0]"))
    with pytest.raises(InvalidConfig, match="group"):
        parse("name: x\n")


def test_unknown_key_line_number(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("name: x\n" + GROUP + "core:\n  L: 5\n  mesh: 0.1\n")
    with pytest.raises(InvalidConfig, match=r"core.mesh \(line 11\)"):
        config_mod.load(path)


def test_load_errors(tmp_path):
    with pytest.raises(InvalidConfig, match="no config"):
        config_mod.resolve(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed\n")
    with pytest.raises(InvalidConfig, match="not valid YAML"):
        config_mod.load(bad)


def test_hash_ignores_seed_and_output():
    a = parse("name: x\nseed: 1\n" + GROUP)
    b = parse("name: x\nseed: 2\noutput: /tmp/elsewhere\n" + GROUP)
    c = parse("name: x\nseed: 1\ndensity: {L: 7}\n" + GROUP)
    assert config_mod.config_hash(a) == config_mod.config_hash(b)
    assert config_mod.config_hash(a) != config_mod.config_hash(c)
