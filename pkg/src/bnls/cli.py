"""Command-line entry point: ``bnls <subcommand> [options]``.

Every subcommand accepts ``--config params.json``; explicit flags override the
file.  Exit status is 0 iff every check the task ran passed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import SWEEP_AXES, parse_config
from .errors import ConfigInvalid, TaskFailed
from .io import dumps, write_json
from .runner import run


def _grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, help="space dimension N")
    p.add_argument("--radius", type=float, help="outer radius R")
    p.add_argument("--nodes", type=int, help="node count M")


def _param_flags(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lam", type=float, help="lambda (both components)")
    p.add_argument("--mu", type=float, help="mu (both components)")
    p.add_argument("--beta", type=float, help="coupling beta")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bnls", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="task", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--report", help="write the JSON report here")
        _grid_flags(p)
        _param_flags(p)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        return p

    p = add("solve-scalar", "scalar radial ground state")
    p.add_argument("--out", help="field file for the ground state")
    p = add("spectrum", "clamped bilaplacian eigenvalues on the ball")
    p.add_argument("--count", type=int, help="number of eigenvalues")
    add("sobolev", "weighted Sobolev constants and thresholds")
    add("classify", "Morse classification of the semi-trivial states")
    p = add("solve-system", "global minimum or mountain-pass point of the system")
    p.add_argument("--mode", choices=("min", "mp"))
    p.add_argument("--out", help="field file for the state pair")
    p = add("fibering-scan", "fibering profiles along the semi-trivial directions")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p = add("sweep", "parameter sweep to CSV")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    add("verify", "run every acceptance check")
    return ap


def config_from_args(args) -> dict:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
    data["task"] = args.task
    grid = data.setdefault("grid", {})
    for flag, key in (("dim", "N"), ("radius", "R"), ("nodes", "M")):
        if getattr(args, flag) is not None:
            grid[key] = getattr(args, flag)
    params = data.setdefault("params", {})
    if args.lam is not None:
        params["lambda1"] = params["lambda2"] = args.lam
    if args.mu is not None:
        params["mu1"] = params["mu2"] = args.mu
    if args.beta is not None:
        params["beta"] = args.beta
    solver = data.setdefault("solver", {})
    for key in ("seed", "tol"):
        if getattr(args, key) is not None:
            solver[key] = getattr(args, key)
    out = data.setdefault("output", {})
    if args.report:
        out["report"] = args.report
    if getattr(args, "out", None):
        out["csv" if args.task in ("sweep", "fibering-scan") else "field"] = args.out
    for key in ("count", "mode", "axis"):
        if getattr(args, key, None) is not None:
            data[key] = getattr(args, key)
    if getattr(args, "values", None) is not None:
        text = args.values.strip()
        try:
            data["values"] = [float(v) for v in text.split(",")] if text else []
        except ValueError as exc:
            raise ConfigInvalid(f"--values: {exc}") from exc
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(config_from_args(args))
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg)
    except TaskFailed as exc:
        if cfg.output.report and exc.report is not None:
            write_json(cfg.output.report, exc.report)
        print(f"task failed: {exc}", file=sys.stderr)
        return 1
    if cfg.task == "verify":
        for line in report["results"]["lines"]:
            print(line)
    elif cfg.task in ("sweep", "fibering-scan") and not cfg.output.csv:
        sys.stdout.write(report["results"]["csv"])
    elif not cfg.output.report:
        sys.stdout.write(dumps(report["results"]))
    for c in report["checks"]:
        if not c["pass"]:
            print(f"check failed: {c['name']}", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
