"""Experiment configuration: YAML loading, schema validation and hashing.

Validation errors name the offending field path and, when the config came
from a file, its line number.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from horolab.errors import InvalidConfig

DEFAULTS = {
    "name": None,
    "seed": 0,
    "output": None,
    "group": None,
    "density": {"L": 8, "L_fine": 10, "exponent": None, "offset": 0.0, "estimate_lengths": [6, 10]},
    "core": {"L": 5, "spacing": 0.1, "probes": 1000},
    "test_functions": {"count": 40, "eta": 0.3, "separation": 0.3, "smoothness": 3, "candidates": 20000},
    "ensemble": {"frames": 48, "word_length": 6},
    "normalisation": {"samples": 1_000_000, "box_samples": 50_000},
    "tolerances": {},
    "experiments": [],
}

TOLERANCES = {
    "identity": 1e-10,
    "form": 1e-12,
    "cocycle": 1e-8,
    "ray": 1e-6,
    "gromov": 1e-8,
    "scaling": 1e-10,
    "basepoint": 0.02,
    "shadow": 0.1,
    "shadow_robust": 0.05,
    "lebesgue_slope": 0.02,
    "doubling_stability": 2.0,
    "lebesgue_alpha": 0.1,
    "lebesgue_doubling": 0.05,
    "sigma": 3.0,
    "inversions": 1,
    "conjugation": 1e-10,
    "rate_oracle": 1e-10,
}


class _Lines:
    """Field path -> line number, read from the YAML node tree."""

    def __init__(self, text: str | None):
        self.lines: dict[tuple, int] = {}
        if text:
            try:
                self._walk(yaml.compose(text), ())
            except yaml.YAMLError:
                pass

    def _walk(self, node, path):
        if node is None:
            return
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                self.lines[path + (key.value,)] = key.start_mark.line + 1
                self._walk(value, path + (key.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                self._walk(item, path + (i,))

    def where(self, path) -> str:
        path = tuple(path)
        dotted = ".".join(str(p) for p in path) or "<root>"
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        return f"{dotted} (line {line})" if line else dotted


def _fail(lines: _Lines, path, message: str):
    raise InvalidConfig(f"{lines.where(path)}: {message}")


def _check_keys(lines, path, data, allowed):
    if not isinstance(data, dict):
        _fail(lines, path, "expected a mapping")
    for key in data:
        if key not in allowed:
            _fail(lines, tuple(path) + (key,), f"unknown key; expected one of {sorted(allowed)}")


def _number(lines, path, value, kind=float, positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(lines, path, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        _fail(lines, path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        _fail(lines, path, "must be positive")
    return kind(value)


def _merge(defaults: dict, data: dict) -> dict:
    out = copy.deepcopy(defaults)
    out.update(data)
    return out


def _validate_group(lines, group):
    path = ("group",)
    if group is None:
        _fail(lines, path, "a group is required")
    _check_keys(lines, path, group, {"dim", "generators"})
    if "dim" not in group or "generators" not in group:
        _fail(lines, path, "needs 'dim' and 'generators'")
    dim = _number(lines, path + ("dim",), group["dim"], int)
    if dim not in (2, 3):
        _fail(lines, path + ("dim",), "only n = 2 and n = 3 are supported")
    gens = group["generators"]
    if not isinstance(gens, list) or not gens:
        _fail(lines, path + ("generators",), "expected a nonempty list")
    for i, gen in enumerate(gens):
        gp = path + ("generators", i)
        _check_keys(lines, gp, gen, {"source", "target", "twist"})
        for side in ("source", "target"):
            if side not in gen:
                _fail(lines, gp, f"missing '{side}'")
            _check_keys(lines, gp + (side,), gen[side], {"center", "radius"})
            centre = gen[side].get("center")
            if not isinstance(centre, list) or len(centre) != dim:
                _fail(lines, gp + (side, "center"), f"expected a list of {dim} numbers")
            for k, c in enumerate(centre):
                _number(lines, gp + (side, "center", k), c)
            _number(lines, gp + (side, "radius"), gen[side].get("radius"), positive=True)
        if "twist" in gen:
            _number(lines, gp + ("twist",), gen["twist"])
    return group


def _section(lines, data, name, checks):
    sec = data.get(name) or {}
    _check_keys(lines, (name,), sec, set(DEFAULTS[name]))
    merged = _merge(DEFAULTS[name], sec)
    for key, (kind, positive, allow_none) in checks.items():
        merged[key] = _number(lines, (name, key), merged[key], kind, positive, allow_none)
    return merged


def validate(data, text: str | None = None) -> dict:
    """Fill defaults and check every field; raises :class:`InvalidConfig`."""
    from horolab.experiments import REGISTRY

    lines = _Lines(text)
    if not isinstance(data, dict):
        _fail(lines, (), "the config must be a mapping")
    _check_keys(lines, (), data, set(DEFAULTS))
    cfg = _merge(DEFAULTS, data)
    if not isinstance(cfg["name"], str) or not cfg["name"]:
        _fail(lines, ("name",), "a nonempty name is required")
    cfg["seed"] = _number(lines, ("seed",), cfg["seed"], int)
    if cfg["seed"] < 0:
        _fail(lines, ("seed",), "must be non-negative")
    if cfg["output"] is not None and not isinstance(cfg["output"], str):
        _fail(lines, ("output",), "expected a path string")
    cfg["group"] = _validate_group(lines, cfg["group"])
    cfg["density"] = _section(lines, data, "density", {
        "L": (int, True, False), "L_fine": (int, True, False),
        "exponent": (float, True, True), "offset": (float, False, False)})
    lens = cfg["density"]["estimate_lengths"]
    if not (isinstance(lens, list) and len(lens) == 2 and all(isinstance(v, int) for v in lens)
            and 2 <= lens[0] < lens[1]):
        _fail(lines, ("density", "estimate_lengths"), "expected [L_min, L_max] with 2 <= L_min < L_max")
    cfg["core"] = _section(lines, data, "core", {
        "L": (int, True, False), "spacing": (float, True, False), "probes": (int, True, False)})
    cfg["test_functions"] = _section(lines, data, "test_functions", {
        "count": (int, True, False), "eta": (float, True, False), "separation": (float, False, False),
        "smoothness": (int, True, False), "candidates": (int, True, False)})
    cfg["ensemble"] = _section(lines, data, "ensemble", {
        "frames": (int, True, False), "word_length": (int, True, False)})
    cfg["normalisation"] = _section(lines, data, "normalisation", {
        "samples": (int, True, False), "box_samples": (int, True, False)})
    tol = data.get("tolerances") or {}
    _check_keys(lines, ("tolerances",), tol, set(TOLERANCES))
    cfg["tolerances"] = {k: _number(lines, ("tolerances", k), v, positive=True) for k, v in
                         _merge(TOLERANCES, tol).items()}

    exps = cfg["experiments"] or []
    if not isinstance(exps, list):
        _fail(lines, ("experiments",), "expected a list")
    out, seen = [], set()
    for i, entry in enumerate(exps):
        path = ("experiments", i)
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, dict) or "name" not in entry:
            _fail(lines, path, "expected a name or a mapping with 'name'")
        name = entry["name"]
        if name not in REGISTRY:
            _fail(lines, path + ("name",), f"unknown experiment {name!r}; see `horolab list-experiments`")
        if name in seen:
            _fail(lines, path + ("name",), f"experiment {name!r} listed twice")
        seen.add(name)
        params = {k: v for k, v in entry.items() if k != "name"}
        defaults = REGISTRY[name].defaults
        for key, value in params.items():
            if key not in defaults:
                _fail(lines, path + (key,), f"unknown parameter for {name!r}; expected one of {sorted(defaults)}")
            ref = defaults[key]
            if isinstance(ref, list) and not (isinstance(value, list) and value and
                                              all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value)):
                _fail(lines, path + (key,), "expected a nonempty list of numbers")
            if isinstance(ref, (int, float)) and not isinstance(ref, bool):
                _number(lines, path + (key,), value, int if isinstance(ref, int) else float)
        out.append({"name": name, **_merge(defaults, params)})
    cfg["experiments"] = out
    return cfg


def load(path) -> dict:
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark else ""
        raise InvalidConfig(f"{path}{where}: not valid YAML") from exc
    return validate(data, text)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the validated config; the seed and output directory are left out."""
    body = {k: v for k, v in cfg.items() if k not in ("seed", "output")}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def bundled_configs() -> dict[str, Path]:
    root = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}


def resolve(name_or_path) -> Path:
    """A path on disk, or the name of a bundled config."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = bundled_configs()
    if str(name_or_path) in bundled:
        return bundled[str(name_or_path)]
    raise InvalidConfig(f"no config file or bundled config named {name_or_path!r}")
