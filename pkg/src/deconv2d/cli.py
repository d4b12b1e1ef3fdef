"""Command-line front end: ``deconv2d forward | solve | reproduce``.

Settings come from built-in defaults, then an optional JSON config file
(``--config``), then explicit flags.  Every ``solve`` and ``reproduce`` run
writes a manifest that ``--manifest`` replays.

Exit codes: 0 success, 2 usage or input error, 3 solver failure,
4 reproduction band failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    NOISE_LADDER,
    PRESETS,
    Cell,
    SweepPlan,
    noisy_data,
    reproduce,
    run_manifest,
    run_sweep,
    write_manifest,
)
from .grid import DataCase, GridFunction, read_matrix_csv, relative_error, write_matrix_csv
from .midpoint import MidpointOperator
from .problems import sample_example
from .spectral import SpectralOperator
from .tikhonov import NewtonConfig, least_squares_solve

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_BAND = 0, 2, 3, 4
SEED_ENV = "DECONV2D_SEED"

log = logging.getLogger("deconv2d")


class UsageError(Exception):
    pass


def _g(v: float) -> str:
    return f"{v:.12g}"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


FORWARD_DEFAULTS = {"example": None, "constant": None, "input": None, "case": "limited", "n": 20,
                    "backend": "midpoint", "check": False, "output": None}
SOLVE_DEFAULTS = {"method": "tikhonov", "penalty": "r1", "rule": "opt", "case": "limited", "example": 1,
                  "rho": 0.01, "seed": None, "n": 20, "chain": True, "output_dir": ".", "plan": {}}
REPRODUCE_DEFAULTS = {"target": None, "seed": None, "jobs": 1, "output_dir": ".", "plan": {}}
DEFAULTS = {"forward": FORWARD_DEFAULTS, "solve": SOLVE_DEFAULTS, "reproduce": REPRODUCE_DEFAULTS}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deconv2d", description="Two-dimensional deautoconvolution.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forward", help="evaluate the autoconvolution of a grid")
    src = f.add_mutually_exclusive_group()
    src.add_argument("--example", type=int, choices=(1, 2))
    src.add_argument("--constant", type=float)
    src.add_argument("--input", help="n x n matrix CSV")
    f.add_argument("--case", choices=("limited", "full"))
    f.add_argument("--n", type=int)
    f.add_argument("--backend", choices=("midpoint", "spectral"))
    f.add_argument("--check", action="store_true", default=None, help="compare both backends")
    f.add_argument("--output", help="write CSV here instead of stdout")

    s = sub.add_parser("solve", help="regularized reconstruction from synthetic data")
    s.add_argument("--method", choices=("tikhonov", "irgnm", "lsq"))
    s.add_argument("--penalty", choices=("r1", "r2", "r3"))
    s.add_argument("--rule", choices=("opt", "sdp", "qo"))
    s.add_argument("--case", choices=("limited", "full"))
    s.add_argument("--example", type=int, choices=(1, 2))
    s.add_argument("--rho", type=float, help="relative noise level")
    s.add_argument("--seed", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--no-chain", dest="chain", action="store_false", default=None,
                   help="start from x0 instead of warm-starting through larger noise levels")
    s.add_argument("--output-dir")

    r = sub.add_parser("reproduce", help="rerun a published table or figure")
    r.add_argument("target", nargs="?", choices=sorted(PRESETS))
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.add_argument("--output-dir")

    for sp in (f, s, r):
        sp.add_argument("--config", help="JSON file with default overrides")
    for sp in (s, r):
        sp.add_argument("--manifest", help="replay the run recorded in this manifest")
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags.  Unknown keys are rejected."""
    cfg = dict(DEFAULTS[command])
    path = getattr(args, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key in cfg:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if "seed" in cfg and cfg["seed"] is None:
        cfg["seed"] = _default_seed()
    if "plan" in cfg:
        try:
            SweepPlan.from_dict(dict(cfg["plan"]))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid plan overrides: {exc}") from None
    return cfg


def _load_manifest(path, command: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
        if data["command"] != command:
            raise UsageError(f"manifest records a {data['command']!r} run, not {command!r}")
        cfg = dict(DEFAULTS[command])
        unknown = set(data["config"]) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys in manifest: {sorted(unknown)}")
        cfg.update(data["config"])
        return cfg
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None


# -- forward ----------------------------------------------------------------

def cmd_forward(cfg: dict, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    case = DataCase.parse(cfg["case"])
    if cfg["input"] is not None:
        try:
            x = read_matrix_csv(cfg["input"])
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read grid {cfg['input']}: {exc}") from None
        if x.shape[0] != x.shape[1]:
            raise UsageError(f"input grid must be square, got {x.shape}")
        n = x.shape[0]
    else:
        n = int(cfg["n"])
        if n < 1:
            raise UsageError("--n must be positive")
        if cfg["constant"] is not None:
            x = GridFunction.constant(n, float(cfg["constant"])).values
        else:
            x = sample_example(cfg["example"] or 1, n).values
    ops = {"midpoint": MidpointOperator(n, case), "spectral": SpectralOperator(n, case)}
    y = ops[cfg["backend"]].forward(x)
    if cfg["check"]:
        other = "spectral" if cfg["backend"] == "midpoint" else "midpoint"
        diff = float(np.max(np.abs(y - ops[other].forward(x))))
        print(f"max backend discrepancy: {_g(diff)}", file=err)
    if cfg["output"]:
        write_matrix_csv(y, cfg["output"])
    else:
        out.write(write_matrix_csv(y))
    return EXIT_OK


# -- solve ------------------------------------------------------------------

def _chain_levels(rho: float, chain: bool) -> tuple[float, ...]:
    if not chain:
        return (rho,)
    return tuple(r for r in NOISE_LADDER if r > rho) + (rho,)


def cmd_solve(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    method, penalty, rule = cfg["method"], cfg["penalty"], cfg["rule"]
    if method == "irgnm" and penalty == "r3":
        raise UsageError("irgnm supports only the r1 and r2 penalties")
    if method == "irgnm" and rule == "qo":
        raise UsageError("the qo rule is available only for tikhonov")
    rho = float(cfg["rho"])
    if rho < 0:
        raise UsageError("--rho must be nonnegative")
    n, seed, example, case = int(cfg["n"]), int(cfg["seed"]), int(cfg["example"]), cfg["case"]
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    xd = sample_example(example, n).values

    if method == "lsq":
        y, ydelta, delta = noisy_data(example, n, case, rho, seed)
        rec = least_squares_solve(ydelta, np.ones((n, n)), NewtonConfig(), xdagger=xd)
        summary = {"chosen_param": "none", "iterations": rec.iterations, "converged": rec.converged}
        rin = relative_error(ydelta.values, y.values, 1.0 / n) if rho > 0 else 0.0
    else:
        plan = SweepPlan.from_dict({**cfg["plan"], "cells": [Cell(example, case, method, penalty)],
                                    "rules": [rule], "rhos": list(_chain_levels(rho, cfg["chain"])),
                                    "n": n, "seed": seed})
        report = run_sweep(plan)
        row = report.row(example, case, method, penalty, rule, rho)
        trace = report.traces[(plan.cells[0], plan.rhos[-1])]
        if row.status != "ok":
            print(f"solver failure: {row.status}", file=sys.stderr)
            _write_solve_outputs(outdir, cfg, None)
            return EXIT_SOLVER
        res = trace.results[rule]
        rec = res.record
        delta, rin = trace.delta, trace.rel_input_error
        summary = {"chosen_param": row.chosen_param, "iterations": row.iterations, "converged": rec.converged}

    lines = {
        "method": method, "penalty": penalty if method != "lsq" else "none",
        "rule": rule if method != "lsq" else "none", "case": case, "example": example, "n": n,
        "seed": seed, "rho": _g(rho), "delta": _g(delta), **summary,
        "residual": _g(rec.residual), "rel_input_error": _g(rin), "rel_output_error": _g(rec.rel_error),
    }
    for k, v in lines.items():
        out.write(f"{k}: {_g(v) if isinstance(v, float) else v}\n")
    _write_solve_outputs(outdir, cfg, rec.x.values)
    return EXIT_OK


def _write_solve_outputs(outdir: Path, cfg: dict, x) -> None:
    if x is not None:
        write_matrix_csv(x, outdir / "reconstruction.csv")
    write_manifest(run_manifest(cfg, command="solve"), outdir / "manifest.json")


# -- reproduce --------------------------------------------------------------

def cmd_reproduce(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    target = cfg["target"]
    if target not in PRESETS:
        raise UsageError(f"reproduce needs a target from {sorted(PRESETS)}")
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    rep = reproduce(target, seed=int(cfg["seed"]), jobs=int(cfg["jobs"]), overrides=dict(cfg["plan"]))
    (outdir / f"{target}.csv").write_text(rep.csv)
    write_manifest(run_manifest(cfg, command="reproduce", plan=rep.config), outdir / f"{target}.manifest.json")
    for v in rep.verdicts:
        out.write(v.line() + "\n")
    failed = sum(not v.passed for v in rep.verdicts)
    out.write(f"{target}: {len(rep.verdicts) - failed}/{len(rep.verdicts)} cells within band\n")
    return EXIT_OK if failed == 0 else EXIT_BAND


COMMANDS = {"forward": cmd_forward, "solve": cmd_solve, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "manifest", None):
            cfg = _load_manifest(args.manifest, args.command)
            if args.output_dir is not None:
                cfg["output_dir"] = args.output_dir
        else:
            cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"deconv2d: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"deconv2d: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
