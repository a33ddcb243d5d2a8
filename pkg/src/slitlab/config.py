"""Experiment configuration: a YAML mapping checked against a small schema.

Errors carry the line number of the offending key.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "SCHEMA", "KINDS"]

KINDS = ("signorini", "degenerate", "frequency", "campanato", "harnack", "inequalities", "pipeline")
ALLOWED_H = tuple(2.0**-k for k in range(5, 10))


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{key + ': ' if key else ''}{message}")
        self.line = line
        self.key = key


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _h(v):
    if not _number(v):
        return "must be a number"
    if not any(abs(v - a) < 1e-12 for a in ALLOWED_H):
        return "must be one of 1/32, 1/64, 1/128, 1/256, 1/512"


def _alpha(v):
    if not _number(v) or not 0 < v < 0.5:
        return "must lie in (0, 1/2)"


def _pos(v):
    if not _number(v) or not v > 0:
        return "must be a positive number"


def _nonneg(v):
    if not _number(v) or v < 0:
        return "must be a nonnegative number"


def _int(lo=None, hi=None):
    def check(v):
        if not isinstance(v, int) or isinstance(v, bool):
            return "must be an integer"
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            return f"must lie in [{lo}, {hi}]"
    return check


def _str(choices=None):
    def check(v):
        if not isinstance(v, str):
            return "must be a string"
        if choices is not None and v not in choices:
            return f"must be one of {', '.join(choices)}"
    return check


def _numlist(v):
    if not isinstance(v, list) or not all(_number(x) for x in v):
        return "must be a list of numbers"


def _centers(v):
    if not isinstance(v, list) or not all(_number(x) or (isinstance(x, list) and all(_number(y) for y in x)) for x in v):
        return "must be a list of numbers or of number lists"


def _matrix(v):
    if not isinstance(v, list) or not all(isinstance(r, list) and all(_number(x) for x in r) for r in v):
        return "must be a list of rows"


SCHEMA = {
    "kind": _str(KINDS),
    "n": _int(1, 2),
    "h": _h,
    "radius": _pos,
    "alpha": _alpha,
    "seed": _int(0),
    "data": _str(),
    "shift": _numlist,
    "radii": _numlist,
    "centers": _centers,
    "samples": _int(1),
    "lambda_shrink": _pos,
    "levels": _int(1, 12),
    "method": _str(("active-set", "psor")),
    "omega": _pos,
    "tau": _pos,
    "coefficients": {
        "type": _str(("identity", "constant", "perturbed")),
        "eps0": _nonneg,
        "seed": _int(0),
        "matrix": _matrix,
    },
    "tolerances": {
        "poincare_slack": _nonneg,
        "hardy": _nonneg,
        "frequency": _nonneg,
        "order": _nonneg,
        "exponent": _nonneg,
        "hopf": _nonneg,
        "free_boundary": _nonneg,
        "cap": _pos,
    },
    "output": {"dir": _str()},
}


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 1
    h: float | None = None
    radius: float = 1.0
    alpha: float = 0.25
    seed: int = 0
    data: str | None = None
    shift: list | None = None
    radii: list | None = None
    centers: list | None = None
    samples: int = 100
    lambda_shrink: float = 0.25
    levels: int = 3
    method: str = "active-set"
    omega: float = 1.5
    tau: float = 0.05
    coefficients: dict = field(default_factory=lambda: {"type": "identity"})
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"dir": "out"})

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def coeff_field(self):
        from .coefficients import CoeffField

        spec = self.coefficients
        kind = spec.get("type", "identity")
        if kind == "identity":
            return CoeffField.identity(self.n, alpha=self.alpha)
        if kind == "constant":
            if "matrix" not in spec:
                raise ConfigError("constant coefficients need 'matrix'", key="coefficients")
            M = np.array(spec["matrix"], dtype=float)
            if M.shape != (self.n + 1, self.n + 1):
                raise ConfigError("matrix must be (n+1) x (n+1)", key="coefficients.matrix")
            return CoeffField.constant(M, alpha=self.alpha)
        return CoeffField.perturbed(self.n, float(spec.get("eps0", 0.05)), int(spec.get("seed", self.seed)),
                                    alpha=self.alpha)


def _check(node_map, schema, prefix=""):
    out = {}
    for knode, vnode in node_map.value:
        key = knode.value
        line = knode.start_mark.line + 1
        full = prefix + key
        if key not in schema:
            raise ConfigError("unknown key", line, full)
        if key in out:
            raise ConfigError("duplicate key", line, full)
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(vnode, yaml.MappingNode):
                raise ConfigError("must be a mapping", line, full)
            out[key] = _check(vnode, rule, full + ".")
            continue
        value = yaml.safe_load(yaml.serialize(vnode))
        msg = rule(value)
        if msg:
            raise ConfigError(msg, vnode.start_mark.line + 1, full)
        out[key] = value
    return out


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; ``kind`` comes from the subcommand."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    data = {}
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError("top level must be a mapping", root.start_mark.line + 1)
        data = _check(root, SCHEMA)
    if kind is not None and data.get("kind", kind) != kind:
        raise ConfigError(f"kind {data['kind']!r} does not match subcommand {kind!r}", key="kind")
    data.setdefault("kind", kind)
    if data["kind"] is None:
        raise ConfigError("missing experiment kind", key="kind")
    return ExperimentConfig(**data)


def load_config(path: str, kind: str | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), kind)
