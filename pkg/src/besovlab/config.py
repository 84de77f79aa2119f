"""Experiment configuration: one YAML (or JSON) file, validated before any
computation. Validation errors carry the line of the offending key."""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ConfigurationError

SUITES = ("decay", "heat", "partition", "retraction", "kfunc", "realinterp",
          "complexinterp", "maximal", "kato")

# Documented defaults; every budget and tolerance lives here and is echoed in reports.
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "cache_dir": None,
    "dense_cap": 4096,
    "grid": {"dim": 1, "sizes": 256, "spacing": 0.125, "boundary": "periodic"},
    "operator": {"kind": "laplacian", "potential": "zero", "potential_minus": "zero",
                 "magnetic": None, "coefficients": None, "mu": 0.1},
    "partition": {"J_max": "auto", "profile": "exp"},
    "suites": {
        "partition": {"k_max": 4, "tolerance": 1e-12, "variation_cap": 2.0},
        "retraction": {"trials": 100, "tolerance": 1e-9},
        "decay": {"eps": 1.0, "ratio_cap": 10.0, "budget": math.inf, "active_threshold": 0.5,
                  "refinement_factor": 1.5, "negative_control": True, "witnesses_csv": True},
        "heat": {"c": 0.125, "t_min_factor": 4.0, "t_max": 1.0, "floor": 1e-8,
                 "oracle_factor": 2.0, "domination_tol": 1e-9},
        "kfunc": {"couples": 16, "J": 2, "t_values": [0.1, 0.7, 1.0, 3.0], "tolerance": 1e-4,
                  "concavity_tol": 1e-8, "monotone_tol": 1e-10},
        "realinterp": {"theta": 0.5, "r": 2.0, "sides": [[0.0, 2.0], [1.0, 2.0]], "trials": 100,
                       "J": [8, 16, 32], "stability": 0.2, "closed_form_tol": 1e-6,
                       "besov": True, "p": 2.0, "besov_trials": 40, "csv": True},
        "complexinterp": {"theta": 0.5, "holder_triples": 1000, "tolerance": 1e-12,
                          "endpoints": [[0.0, 2.0, 2.0], [1.0, 2.0, 2.0]], "trials": 100,
                          "stability": 0.2, "unit_tol": 1e-10},
        "maximal": {"profiles": ["ball", "exponential"], "j": [0, 8], "variation_cap": 2.0,
                    "tolerance": 1e-12, "random_functions": 4},
        "kato": {"sizes": [16, 32], "half_width": 1.0, "radius": 0.5, "ball_radius": 0.75,
                 "value": 1.0, "tolerance": 0.1},
    },
}


@dataclass
class ExperimentConfig:
    """Validated configuration plus the source line of every key."""

    data: dict
    lines: dict = field(default_factory=dict, repr=False)
    path: Optional[str] = None

    def line(self, *keys) -> Optional[int]:
        # fall back to the nearest enclosing key
        for cut in range(len(keys), 0, -1):
            if keys[:cut] in self.lines:
                return self.lines[keys[:cut]]
        return None

    def error(self, message: str, *keys) -> ConfigurationError:
        where = ".".join(str(k) for k in keys)
        return ConfigurationError(f"{where}: {message}" if where else message, line=self.line(*keys))

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def suite(self, name: str) -> dict:
        return self.data["suites"][name]

    @property
    def selected(self) -> list:
        return list(self.data.get("run", []))

    @property
    def cache_dir(self) -> Optional[str]:
        return self.data.get("cache_dir") or os.environ.get("BESOVLAB_CACHE_DIR")


def _line_map(node, prefix=()) -> dict:
    out = {}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            out[path] = key.start_mark.line + 1
            out.update(_line_map(value, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            out[prefix + (i,)] = item.start_mark.line + 1
            out.update(_line_map(item, prefix + (i,)))
    return out


def _merge(defaults: dict, given: dict, cfg: ExperimentConfig, prefix=()) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise cfg.error(f"unknown key; expected one of {sorted(defaults)}", *prefix, key)
        if isinstance(defaults[key], dict) and key != "suites":
            if not isinstance(value, dict):
                raise cfg.error("expected a mapping", *prefix, key)
            out[key] = _merge(defaults[key], value, cfg, prefix + (key,))
        else:
            out[key] = value
    return out


def parse_config(text: str, path: Optional[str] = None) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigurationError(f"malformed config: {getattr(exc, 'problem', exc)}", line=line) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping at the top level", line=1)
    cfg = ExperimentConfig({}, _line_map(node) if node is not None else {}, path)
    run = raw.pop("run", None)
    suites_given = raw.get("suites", {}) or {}
    if not isinstance(suites_given, dict):
        raise cfg.error("expected a mapping of suite names", "suites")
    merged = _merge({k: v for k, v in DEFAULTS.items()}, raw, cfg)
    suites = copy.deepcopy(DEFAULTS["suites"])
    for name, params in suites_given.items():
        if name not in SUITES:
            raise cfg.error(f"unknown suite; expected one of {list(SUITES)}", "suites", name)
        if params is None:
            params = {}
        if not isinstance(params, dict):
            raise cfg.error("expected a mapping of suite parameters", "suites", name)
        suites[name] = _merge(DEFAULTS["suites"][name], params, cfg, ("suites", name))
    merged["suites"] = suites
    if run is None:
        run = list(suites_given)
    if isinstance(run, str):
        run = [run]
    for i, name in enumerate(run):
        if name not in SUITES:
            raise cfg.error(f"unknown suite {name!r}", "run", i)
    merged["run"] = list(run)
    cfg.data = merged
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {p} does not exist or is not readable")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {p}: {exc}") from None
    cfg = parse_config(text, str(p))
    _resolve_paths(cfg, p.parent)
    return cfg


def _resolve_paths(cfg: ExperimentConfig, base: Path) -> None:
    """CSV field paths are relative to the config file."""
    op = cfg.data["operator"]
    for key in ("potential", "potential_minus"):
        _resolve_field(cfg, op.get(key), base, ("operator", key))
    for i, axis_field in enumerate(op.get("magnetic") or []):
        _resolve_field(cfg, axis_field, base, ("operator", "magnetic", i))
    for name, coeff in (op.get("coefficients") or {}).items():
        _resolve_field(cfg, coeff, base, ("operator", "coefficients", name))


def _resolve_field(cfg, desc, base: Path, keys) -> None:
    if isinstance(desc, dict) and desc.get("preset") == "csv":
        if "path" not in desc:
            raise cfg.error("csv field needs a path", *keys)
        path = Path(desc["path"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise cfg.error(f"referenced file {path} does not exist", *keys, "path")
        desc["path"] = str(path)


# -- validation ---------------------------------------------------------------------


def _number(cfg, value, *keys, lo=-math.inf, hi=math.inf, lo_open=False, allow_inf=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if isinstance(value, str) and value.lower() in ("inf", "infinity", ".inf"):
            value = math.inf
        else:
            raise cfg.error(f"expected a number, got {value!r}", *keys)
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise cfg.error(f"expected a finite number, got {value}", *keys)
    if value < lo or (lo_open and value == lo) or value > hi:
        bracket = "(" if lo_open else "["
        raise cfg.error(f"value {value} outside {bracket}{lo}, {hi}]", *keys)
    return value


def _integer(cfg, value, *keys, lo=0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise cfg.error(f"expected an integer, got {value!r}", *keys)
    if value < lo:
        raise cfg.error(f"expected an integer >= {lo}, got {value}", *keys)
    return value


def _exponent(cfg, value, *keys) -> float:
    return _number(cfg, value, *keys, lo=1.0, allow_inf=True)


def validate(cfg: ExperimentConfig) -> None:
    d = cfg.data
    d["seed"] = _integer(cfg, d["seed"], "seed")
    d["dense_cap"] = _integer(cfg, d["dense_cap"], "dense_cap", lo=1)
    op = d["operator"]
    from .operators import KINDS

    if op["kind"] not in KINDS:
        raise cfg.error(f"unknown operator kind {op['kind']!r}; expected one of {list(KINDS)}", "operator", "kind")
    _number(cfg, op["mu"], "operator", "mu", lo=0.0, hi=1.0, lo_open=True)
    part = d["partition"]
    if part["J_max"] != "auto":
        _integer(cfg, part["J_max"], "partition", "J_max", lo=2)
    from .partition import PROFILES

    if part["profile"] not in PROFILES:
        raise cfg.error(f"unknown profile; expected one of {sorted(PROFILES)}", "partition", "profile")

    s = d["suites"]
    k = s["partition"]
    _integer(cfg, k["k_max"], "suites", "partition", "k_max")
    if k["k_max"] > 4:
        raise cfg.error("derivative checks are limited to k_max <= 4", "suites", "partition", "k_max")
    _number(cfg, k["tolerance"], "suites", "partition", "tolerance", lo=0.0, lo_open=True)
    _number(cfg, k["variation_cap"], "suites", "partition", "variation_cap", lo=1.0)

    r = s["retraction"]
    _integer(cfg, r["trials"], "suites", "retraction", "trials", lo=1)
    _number(cfg, r["tolerance"], "suites", "retraction", "tolerance", lo=0.0, lo_open=True)

    dc = s["decay"]
    dc["eps"] = _number(cfg, dc["eps"], "suites", "decay", "eps", lo=0.0, lo_open=True)
    dc["budget"] = _number(cfg, dc["budget"], "suites", "decay", "budget", lo=0.0, lo_open=True, allow_inf=True)
    _number(cfg, dc["ratio_cap"], "suites", "decay", "ratio_cap", lo=1.0)
    _number(cfg, dc["active_threshold"], "suites", "decay", "active_threshold", lo=0.0, hi=1.0, lo_open=True)
    _number(cfg, dc["refinement_factor"], "suites", "decay", "refinement_factor", lo=1.0)

    h = s["heat"]
    _number(cfg, h["c"], "suites", "heat", "c", lo=0.0, lo_open=True)
    _number(cfg, h["t_min_factor"], "suites", "heat", "t_min_factor", lo=0.0, lo_open=True)
    _number(cfg, h["t_max"], "suites", "heat", "t_max", lo=0.0, lo_open=True)
    _number(cfg, h["floor"], "suites", "heat", "floor", lo=0.0, hi=1.0, lo_open=True)
    _number(cfg, h["oracle_factor"], "suites", "heat", "oracle_factor", lo=1.0)

    kf = s["kfunc"]
    _integer(cfg, kf["couples"], "suites", "kfunc", "couples", lo=1)
    _integer(cfg, kf["J"], "suites", "kfunc", "J")
    if kf["J"] > 3:
        raise cfg.error("the brute-force oracle is limited to J <= 3", "suites", "kfunc", "J")
    if not isinstance(kf["t_values"], list) or not kf["t_values"]:
        raise cfg.error("expected a non-empty list of times", "suites", "kfunc", "t_values")
    for i, t in enumerate(kf["t_values"]):
        _number(cfg, t, "suites", "kfunc", "t_values", i, lo=0.0, lo_open=True)
    _number(cfg, kf["tolerance"], "suites", "kfunc", "tolerance", lo=0.0, lo_open=True)

    ri = s["realinterp"]
    ri["theta"] = _number(cfg, ri["theta"], "suites", "realinterp", "theta", lo=0.0, hi=1.0, lo_open=True)
    if ri["theta"] >= 1:
        raise cfg.error("theta must lie in (0, 1)", "suites", "realinterp", "theta")
    ri["r"] = _exponent(cfg, ri["r"], "suites", "realinterp", "r")
    ri["sides"] = _sides(cfg, ri["sides"], ("suites", "realinterp", "sides"), width=2)
    if ri["sides"][0][0] == ri["sides"][1][0]:
        raise cfg.error("real interpolation needs s0 != s1", "suites", "realinterp", "sides")
    _integer(cfg, ri["trials"], "suites", "realinterp", "trials", lo=1)
    if not isinstance(ri["J"], list) or not ri["J"]:
        raise cfg.error("expected a non-empty list of sequence lengths", "suites", "realinterp", "J")
    for i, J in enumerate(ri["J"]):
        _integer(cfg, J, "suites", "realinterp", "J", i)
    ri["p"] = _exponent(cfg, ri["p"], "suites", "realinterp", "p")
    _integer(cfg, ri["besov_trials"], "suites", "realinterp", "besov_trials", lo=1)

    ci = s["complexinterp"]
    ci["theta"] = _number(cfg, ci["theta"], "suites", "complexinterp", "theta", lo=0.0, hi=1.0, lo_open=True)
    if ci["theta"] >= 1:
        raise cfg.error("theta must lie in (0, 1)", "suites", "complexinterp", "theta")
    ci["endpoints"] = _sides(cfg, ci["endpoints"], ("suites", "complexinterp", "endpoints"), width=3)
    _integer(cfg, ci["holder_triples"], "suites", "complexinterp", "holder_triples", lo=1)
    _integer(cfg, ci["trials"], "suites", "complexinterp", "trials", lo=1)

    mx = s["maximal"]
    from .bounds import PROFILES as HPROFILES

    for i, name in enumerate(mx["profiles"]):
        if name not in HPROFILES:
            raise cfg.error(f"unknown profile; expected one of {sorted(HPROFILES)}", "suites", "maximal", "profiles", i)
    if not (isinstance(mx["j"], list) and len(mx["j"]) == 2):
        raise cfg.error("expected [j_min, j_max]", "suites", "maximal", "j")
    for i, j in enumerate(mx["j"]):
        _integer(cfg, j, "suites", "maximal", "j", i)

    ka = s["kato"]
    for i, n in enumerate(ka["sizes"]):
        _integer(cfg, n, "suites", "kato", "sizes", i, lo=2)
    for key in ("half_width", "radius", "ball_radius", "tolerance"):
        _number(cfg, ka[key], "suites", "kato", key, lo=0.0, lo_open=True)
    _number(cfg, ka["value"], "suites", "kato", "value", lo=0.0)
    if ka["ball_radius"] < ka["radius"]:
        raise cfg.error("the constant-ball check needs ball_radius >= radius", "suites", "kato", "ball_radius")


def _sides(cfg, value, keys, width: int) -> list:
    if not (isinstance(value, list) and len(value) == 2):
        raise cfg.error("expected two endpoint entries", *keys)
    out = []
    for i, side in enumerate(value):
        if not (isinstance(side, list) and len(side) == width):
            raise cfg.error(f"expected {width} numbers", *keys, i)
        s = _number(cfg, side[0], *keys, i, 0)
        rest = [_exponent(cfg, v, *keys, i, k + 1) for k, v in enumerate(side[1:])]
        out.append([s] + rest)
    return out
