"""Command line runner: one subcommand per experiment kind.

Every run writes deterministic CSV/JSON artifacts into the output directory
and exits 0 when all checks pass, 1 when a check fails and 2 on
configuration errors.  Keys set in the config file take precedence over the
corresponding command line flags.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np
import yaml

from .config import ALLOWED_H, ConfigError, ExperimentConfig, parse_config

__all__ = ["main", "run", "build_config", "SUBCOMMANDS", "REPORT_SCHEMA", "SOLVER_SCHEMA"]

SUBCOMMANDS = {
    "solve-signorini": "signorini",
    "solve-degenerate": "degenerate",
    "frequency": "frequency",
    "campanato": "campanato",
    "harnack": "harnack",
    "verify-inequalities": "inequalities",
    "pipeline-c2alpha": "pipeline",
}

_NUM = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["stage", "inputs", "constants", "exponents", "pass"],
    "properties": {
        "stage": {"type": "string"},
        "inputs": {"type": "object"},
        "constants": {"type": "object"},
        "exponents": {"type": "object"},
        "pass": {"type": "boolean"},
    },
}
SOLVER_SCHEMA = {
    "type": "object",
    "required": ["problem_id", "h", "iterations", "residual", "energy", "bounds_checked"],
    "properties": {
        "problem_id": {"type": "string"},
        "h": {"type": "number"},
        "iterations": {"type": "integer"},
        "residual": _NUM,
        "energy": _NUM,
        "bounds_checked": {
            "type": "array",
            "items": {"type": "object", "required": ["name", "pass"],
                      "properties": {"name": {"type": "string"}, "pass": {"type": "boolean"}}},
        },
    },
}


# --------------------------------------------------------------------------- output helpers
def _plain(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_cell(v) for v in r])
    return buf.getvalue()


# --------------------------------------------------------------------------- config
def build_config(kind: str, text: str | None, h=None, seed=None, out=None) -> ExperimentConfig:
    """Config from file text with flags filling keys the file leaves unset."""
    cfg = parse_config(text or "", kind)
    set_keys = set()
    if text:
        loaded = yaml.safe_load(text)
        if isinstance(loaded, dict):
            set_keys = set(loaded)
    if h is not None and "h" not in set_keys:
        if not any(abs(h - a) < 1e-12 for a in ALLOWED_H):
            raise ConfigError("must be one of 1/32, 1/64, 1/128, 1/256, 1/512", key="--h")
        cfg.h = float(h)
    if seed is not None and "seed" not in set_keys:
        if seed < 0:
            raise ConfigError("must be nonnegative", key="--seed")
        cfg.seed = int(seed)
    if out is not None and "output" not in set_keys:
        cfg.output = {"dir": out}
    return cfg


def _h(cfg, default):
    return float(cfg.h) if cfg.h is not None else default


def _field(cfg, default):
    from .fields import get_field

    name = cfg.data or default
    try:
        return name, get_field(name, cfg.shift)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), key="data") from None


def _coeffs(cfg):
    try:
        return cfg.coeff_field()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), key="coefficients") from None


def _centers(cfg, n, default):
    raw = cfg.centers if cfg.centers is not None else default
    out = []
    for c in raw:
        c = [float(v) for v in np.atleast_1d(c)]
        if len(c) != n - 1:
            raise ConfigError(f"centers need {n - 1} tangential coordinates", key="centers")
        out.append(tuple(c))
    return out


# --------------------------------------------------------------------------- runners
def _run_signorini(cfg):
    from .grid import SlitGrid
    from .signorini import SignoriniProblem, frequency_profile, solve_signorini

    h = _h(cfg, 1 / 64)
    name, data = _field(cfg, "model" if cfg.n == 1 else "curved")
    A = _coeffs(cfg)
    grid = SlitGrid.box(cfg.n, h, cfg.radius, half=True)
    sol = solve_signorini(SignoriniProblem(cfg.n, A, data, problem_id=f"signorini-{name}"), grid,
                          method=cfg.method, omega=cfg.omega)
    rep = sol.report()
    xT, gam, flags = sol.Gamma
    ok = all(b["pass"] for b in rep["bounds_checked"])
    fb_tol = cfg.tol("free_boundary", np.inf)
    if cfg.n == 1 and np.isfinite(gam).any():
        dist = float(np.abs(np.asarray(gam)).min()) if np.ndim(gam) else abs(float(gam))
        rep["bounds_checked"].append({"name": "free_boundary_distance", "value": dist,
                                      "pass": bool(dist <= fb_tol)})
        ok &= dist <= fb_tol
    gam = np.atleast_1d(gam)
    flags = np.atleast_1d(flags)
    xs = np.asarray(xT).reshape(gam.size, -1)[:, 0] if np.size(xT) else np.zeros(gam.size)
    fb_rows = [(float(x), float(g), bool(f)) for x, g, f in zip(xs, gam, flags)]
    arts = {"solver.json": to_json(rep),
            "free_boundary.csv": to_csv(["x_tangential", "gamma", "flagged"], fb_rows)}
    if cfg.radii:
        x0 = np.zeros(cfg.n + 1)
        prof = frequency_profile(sol.U, x0, radii=tuple(cfg.radii))
        arts["frequency.csv"] = to_csv(["r", "N"], zip(prof.radii, prof.N))
    return arts, bool(ok)


def _run_degenerate(cfg):
    from .dsolve import DegenerateProblem, solve_degenerate
    from .grid import SlitGrid

    h = _h(cfg, 1 / 64)
    name, data = _field(cfg, "harmonic_linear")
    A = _coeffs(cfg)
    grid = SlitGrid.box(cfg.n, h, cfg.radius, coords="sqrt")
    w = solve_degenerate(DegenerateProblem(A, alpha=cfg.alpha, boundary=data,
                                           problem_id=f"degenerate-{name}"), grid)
    rep = w.meta["report"].as_dict()
    err = float(np.max(np.abs(w.values - data(grid.points))))
    rows = [("sup_error_vs_data", h, f"box({cfg.radius})", err)]
    ok = all(b["pass"] for b in rep["bounds_checked"])
    return {"solver.json": to_json(rep),
            "errors.csv": to_csv(["check_name", "h", "region", "value"], rows)}, bool(ok)


def _run_frequency(cfg):
    from .grid import SlitGrid
    from .signorini import frequency_profile

    h = _h(cfg, 1 / 128)
    name, data = _field(cfg, "model")
    grid = SlitGrid.box(cfg.n, h, cfg.radius, half=True)
    radii = tuple(cfg.radii or (0.1, 0.2, 0.3, 0.4, 0.5))
    if max(radii) > cfg.radius:
        raise ConfigError("radii must not exceed radius", key="radii")
    prof = frequency_profile(grid.sample(data, "even"), np.zeros(cfg.n + 1), radii=radii)
    viol = prof.monotonicity_violation()
    tol = cfg.tol("frequency", 0.01)
    report = {"stage": "frequency", "inputs": {"data": name, "h": h, "n": cfg.n},
              "constants": {"N": list(prof.N), "monotonicity_violation": viol},
              "exponents": {"N_min": float(np.min(prof.N)), "N_max": float(np.max(prof.N))},
              "pass": bool(viol <= tol)}
    return {"frequency.csv": to_csv(["r", "N"], zip(prof.radii, prof.N)),
            "report.json": to_json(report)}, report["pass"]


def _run_campanato(cfg):
    from .analysis import campanato_fit, kappa_at
    from .grid import SlitGrid

    h = _h(cfg, 1 / 128)
    name, data = _field(cfg, "campanato_model")
    A = _coeffs(cfg)
    radii = tuple(cfg.radii or (0.4, 0.2, 0.1, 0.05))
    grid = SlitGrid.box(cfg.n, h, cfg.radius, coords="sqrt")
    w = grid.sample(data)
    centers = _centers(cfg, cfg.n, [[0.0] * (cfg.n - 1)])
    tol = cfg.tol("exponent", 0.05)
    reps = [campanato_fit(w, c, radii, cfg.alpha, float(kappa_at(A, np.array([c]))[0]), tol) for c in centers]
    rows = []
    for c, r in zip(centers, reps):
        for rad, s in zip(r.radii, r.sigma):
            rows.append((" ".join(repr(v) for v in c), rad, s))
    report = {"stage": "campanato", "inputs": {"data": name, "h": h, "alpha": cfg.alpha, "radii": list(radii)},
              "constants": {"fits": [r.as_dict() for r in reps]},
              "exponents": {"decay": [r.exponent for r in reps]},
              "pass": all(r.passed for r in reps)}
    return {"campanato.csv": to_csv(["center", "r", "sigma"], rows), "report.json": to_json(report)}, report["pass"]


def _run_harnack(cfg):
    from .analysis import harnack_experiment
    from .grid import FieldSample, SlitGrid

    h = _h(cfg, 1 / 128)
    name, data = _field(cfg, "model")
    A = _coeffs(cfg)
    grid = SlitGrid.box(cfg.n, h, cfg.radius, coords="sqrt")
    u1 = grid.sample(data)
    u2 = FieldSample(grid, grid.xi)
    default = [[0.0]] if cfg.n == 2 else [[]]
    centers = _centers(cfg, cfg.n, default)
    radii = tuple(cfg.radii or (0.4, 0.2, 0.1))
    har = harnack_experiment(u1, u2, centers, A, radii, cfg.alpha, floor=cfg.tol("hopf", 0.1))
    rows = []
    for c, r in zip(har.centers, har.reports):
        L = r.L
        rows.append((" ".join(repr(v) for v in c), L.c0, *L.c, L.c_rho, r.exponent, r.passed))
    header = ["center", "c0"] + [f"c{i + 1}" for i in range(cfg.n)] + ["c_rho", "exponent", "pass"]
    report = {"stage": "harnack", "inputs": {"data": name, "h": h, "alpha": cfg.alpha, "radii": list(radii)},
              "constants": {"values": har.values, "slopes": har.slopes, "hypotheses": har.hypotheses},
              "exponents": {"campanato": [r.exponent for r in har.reports],
                            "taylor": har.taylor_exponent, "derivative": har.derivative_exponent},
              "pass": all(r.passed for r in har.reports)}
    return {"harnack.csv": to_csv(header, rows), "report.json": to_json(report)}, report["pass"]


def _poincare_ratio(args):
    from .fields import random_bump
    from .grid import FieldSample
    from .wspace import check_poincare

    grid, seed, radius = args
    return check_poincare(FieldSample(grid, random_bump(grid.points / radius, seed)), radius)


def _run_inequalities(cfg):
    from .grid import FieldSample, SlitGrid
    from .parallel import pmap
    from .wspace import InequalityRow, check_hardy, rows_to_csv

    if cfg.n != 1:
        raise ConfigError("inequality checks run with n = 1", key="n")
    h = _h(cfg, 1 / 128)
    grid = SlitGrid.box(1, h, cfg.radius, coords="sqrt")
    ratios = pmap(_poincare_ratio, [(grid, cfg.seed + k, cfg.radius) for k in range(cfg.samples)])
    pbound = 4 * cfg.radius * (1 + cfg.tol("poincare_slack", 0.1))
    pmax = float(max(ratios))
    hardy = check_hardy(FieldSample(grid, grid.xi))
    htol = cfg.tol("hardy", 0.05)
    label = f"B({cfg.radius})"
    rows = [InequalityRow("poincare_max", h, label, pmax, pbound, pmax <= pbound),
            InequalityRow("hardy_xi", h, label, hardy, 4 + htol, abs(hardy - 4) <= htol)]
    return {"inequalities.csv": rows_to_csv(rows)}, all(r.passed for r in rows)


def _run_pipeline(cfg):
    from .analysis import HypothesisError, c2alpha_pipeline
    from .signorini import SignoriniProblem

    if cfg.n != 2:
        raise ConfigError("the pipeline runs with n = 2", key="n")
    h = _h(cfg, 1 / 64)
    name, data = _field(cfg, "curved")
    A = _coeffs(cfg)
    problem = SignoriniProblem(2, A, data, problem_id=f"pipeline-{name}")
    try:
        rep = c2alpha_pipeline(problem, h=h, alpha=cfg.alpha, tau=cfg.tau,
                               hopf_threshold=cfg.tol("hopf", 0.5))
    except HypothesisError as exc:
        rep = {"stage": exc.stage, "inputs": {"h": h, "data": name}, "constants": {},
               "exponents": {}, "pass": False, "error": str(exc)}
    return {"report.json": to_json(rep)}, bool(rep["pass"])


RUNNERS = {
    "signorini": _run_signorini,
    "degenerate": _run_degenerate,
    "frequency": _run_frequency,
    "campanato": _run_campanato,
    "harnack": _run_harnack,
    "inequalities": _run_inequalities,
    "pipeline": _run_pipeline,
}


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment, write its artifacts and return the exit code."""
    arts, ok = RUNNERS[cfg.kind](cfg)
    outdir = cfg.output.get("dir", "out")
    os.makedirs(outdir, exist_ok=True)
    for fname in sorted(arts):
        with open(os.path.join(outdir, fname), "w", encoding="utf-8", newline="") as fh:
            fh.write(arts[fname])
    return 0 if ok else 1


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slitlab", description="Numerical experiments for equations near a slit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=f"run a {kind} experiment")
        sp.add_argument("--config", help="YAML experiment config; its keys override flags")
        sp.add_argument("--h", type=float, help="grid spacing (1/32 ... 1/512)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--out", help="output directory")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    try:
        text = None
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", key="--config") from None
        cfg = build_config(kind, text, args.h, args.seed, args.out)
        return run(cfg)
    except ConfigError as exc:
        print(f"slitlab: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
