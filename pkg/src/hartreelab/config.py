"""Experiment configuration files: YAML trees validated against a fixed schema.

Every validation message carries the file name and line of the offending
entry, e.g. ``run.yaml:7: potential.gamma: must lie in (0, 3/2), got 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import yaml

KINDS = ("hartree-run", "decay-fit", "regime-sweep", "fock-verify", "fluctuation-verify", "rate-scan")


class ConfigError(ValueError):
    """A schema violation, already formatted with its source line."""


# -- field checkers -------------------------------------------------------
# each returns the normalized value or raises ValueError with a short reason

def _number(lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"must be a number, got {v!r}")
        if integer and (not isinstance(v, int)):
            raise ValueError(f"must be an integer, got {v!r}")
        if not math.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ValueError(_range_text(lo, hi, lo_open, hi_open, v))
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ValueError(_range_text(lo, hi, lo_open, hi_open, v))
        return v if integer else float(v)
    return check


def _range_text(lo, hi, lo_open, hi_open, v):
    left = "(" if lo_open else "["
    right = ")" if hi_open else "]"
    lo_s = "-inf" if lo is None else f"{lo:g}"
    hi_s = "inf" if hi is None else f"{hi:g}"
    if hi == 1.5:
        hi_s = "3/2"
    return f"must lie in {left}{lo_s}, {hi_s}{right}, got {v!r}"


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(map(str, options))}, got {v!r}")
        return v
    return check


def _power_of_two(v):
    v = _number(2, integer=True)(v)
    if v & (v - 1):
        raise ValueError(f"must be a power of two, got {v}")
    return v


def _pair(allow_null_hi=False):
    def check(v):
        if not isinstance(v, list) or len(v) != 2:
            raise ValueError("must be a two-element list [low, high]")
        lo = _number()(v[0])
        if v[1] is None and allow_null_hi:
            return [lo, None]
        hi = _number()(v[1])
        if hi < lo:
            raise ValueError("high end below low end")
        return [lo, hi]
    return check


def _list_of(item, min_len=1):
    def check(v):
        if not isinstance(v, list) or len(v) < min_len:
            raise ValueError(f"must be a list with at least {min_len} entries")
        return [item(x) for x in v]
    return check


def _string(v):
    if not isinstance(v, str):
        raise ValueError("must be a string")
    return v


def _optional(check):
    def wrapped(v):
        return None if v is None else check(v)
    return wrapped


def _case(v):
    from .decay import CASES

    v = str(v)
    if v not in CASES:
        raise ValueError(f"must be one of {', '.join(CASES)}, got {v!r}")
    return v


# -- schema ------------------------------------------------------------------
# section -> {key: (checker, default)}; a default of ``...`` marks a required key

GRID = {"dim": (_choice(1, 2, 3), ...), "points": (_power_of_two, ...), "box_length": (_number(0, lo_open=True), ...)}
POTENTIAL = {
    "lam": (_number(), ...),
    "mu": (_number(0), 0.0),
    "gamma": (_number(0, 1.5, lo_open=True, hi_open=True), 1.0),
    "mollification": (_number(0, lo_open=True), 0.5),
}
SOLVER = {
    "dt": (_number(0, lo_open=True), ...),
    "horizon": (_number(0, lo_open=True), ...),
    "record_stride": (_number(1, integer=True), 1),
    "guard_threshold": (_number(0, lo_open=True), 1e-6),
    "shell_fraction": (_number(0, 0.5, lo_open=True, hi_open=True), 0.125),
    "on_breach": (_choice("raise", "stop"), "stop"),
}
INITIAL = {"width": (_number(0, lo_open=True), 1.0)}
FIT = {
    "series": (_choice("linf", "s_sup"), "linf"),
    "window": (_pair(allow_null_hi=True), [2.0, None]),
    "expect": (_optional(_pair()), None),
    "case": (_optional(_case), None),
    "lambda_c": (_optional(_number(0, lo_open=True)), None),
    "alpha": (_optional(_number(0, 1, lo_open=True, hi_open=True)), None),
}
SWEEP = {
    "lambda_c": (_number(0, lo_open=True), 1.0),
    "alpha": (_optional(_number(0, 1, lo_open=True, hi_open=True)), None),
}
FOCK = {
    "modes": (_number(1, 4, integer=True), 2),
    "cutoff": (_number(8, 40, integer=True), 24),
    "samples": (_number(1, integer=True), 1000),
    "sector_norm_N": (_list_of(_number(1, integer=True)), [4, 16, 64]),
    "weighted_norm_N": (_list_of(_number(1, integer=True)), [4, 16, 64, 256]),
}
FLUCTUATION = {
    "modes": (_number(1, 8, integer=True), 4),
    "cutoff": (_number(2, 12, integer=True), 4),
    "N": (_number(1, integer=True), 4),
    "dt": (_number(0, lo_open=True), 0.01),
    "horizon": (_number(0, lo_open=True), 1.0),
    "width": (_number(0, lo_open=True), 1.0),
    "abort_top_mass": (_number(0, 1, lo_open=True), 1e-2),
}
RATE = {
    "N": (_list_of(_number(2, integer=True), 2), [2, 3, 4, 5]),
    "times": (_list_of(_number(0, lo_open=True)), [0.5]),
    "width": (_number(0, lo_open=True), 1.0),
    "expect_slope": (_optional(_pair()), None),
    "max_dimension": (_number(1, integer=True), 2_000_000),
}

SECTIONS = {
    "hartree-run": {"grid": GRID, "potential": POTENTIAL, "solver": SOLVER, "initial": INITIAL},
    "decay-fit": {"grid": GRID, "potential": POTENTIAL, "solver": SOLVER, "initial": INITIAL, "fit": FIT},
    "regime-sweep": {"sweep": SWEEP},
    "fock-verify": {"fock": FOCK},
    "fluctuation-verify": {"grid": GRID, "potential": POTENTIAL, "fluctuation": FLUCTUATION},
    "rate-scan": {"grid": GRID, "potential": POTENTIAL, "rate": RATE},
}
OPTIONAL_SECTIONS = {"initial", "fit", "sweep", "fock", "fluctuation", "rate"}
TOP = {"experiment", "seed", "name"}


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    sections: dict
    source: str

    def to_dict(self) -> dict:
        return {"experiment": self.kind, "name": self.name, "seed": self.seed, **self.sections}


# -- loading -----------------------------------------------------------------

def _plain(node):
    """Convert a composed YAML node to python data, remembering key lines."""
    return yaml.safe_load(yaml.serialize(node))


def _lines(node, prefix="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _lines(v, path, out)
    return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    name = path.name
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{name}: cannot read config: {exc.strerror}") from exc
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{name}:{mark.line + 1}" if mark else name
        raise ConfigError(f"{where}: not valid YAML: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{name}:1: top level must be a mapping")
    lines = _lines(node)
    data = _plain(node)
    return validate(data, lines, name)


def validate(data: dict, lines: dict | None = None, source: str = "<config>") -> ExperimentConfig:
    lines = lines or {}

    def fail(key, reason):
        line = lines.get(key)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {key}: {reason}")

    kind = data.get("experiment")
    if kind is None:
        fail("experiment", f"required; one of {', '.join(KINDS)}")
    if kind not in KINDS:
        fail("experiment", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    schema = SECTIONS[kind]
    for key in data:
        if key not in TOP and key not in schema:
            fail(str(key), f"unknown key for experiment {kind}")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        fail("seed", "must be a nonnegative integer")
    name = data.get("name", kind)
    if not isinstance(name, str):
        fail("name", "must be a string")

    sections = {}
    for sec, fields in schema.items():
        raw = data.get(sec)
        if raw is None:
            if sec not in OPTIONAL_SECTIONS:
                fail(sec, "required section is missing")
            raw = {}
        if not isinstance(raw, dict):
            fail(sec, "must be a mapping")
        for key in raw:
            if key not in fields:
                fail(f"{sec}.{key}", "unknown key")
        out = {}
        for key, (check, default) in fields.items():
            if key not in raw:
                if default is ...:
                    fail(f"{sec}.{key}", "required")
                out[key] = default
                continue
            try:
                out[key] = check(raw[key])
            except ValueError as exc:
                fail(f"{sec}.{key}", str(exc))
        sections[sec] = out
    return ExperimentConfig(kind, name, seed, sections, source)
