"""Command line interface: ``bayessep point|sweep|validate``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .sweep import COLUMNS, MODES, Grid, SweepConfig, evaluate_point, run_sweep, write_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULT_GRIDS = {
    "fig1": "0.1:3:50:log",
    "fig2_fixed_mean": "0.05:2:50:log",
    "fig3_fixed_variance": "0.25:5:50:log",
    "custom": "0.1:3:50:log",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _cutoff(text):
    if text == "auto":
        return text
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("cutoff must be an integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("cutoff must be positive")
    return n


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{num}: expected key=value")
            k, v = (p.strip() for p in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_parser():
    p = _Parser(prog="bayessep", description="Bayesian separation estimation: MMSE vs SPADE and direct imaging.")
    p.add_argument("--version", action="version", version=f"bayessep {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pt = sub.add_parser("point", help="evaluate a single prior")
    pt.add_argument("--prior", choices=["half-gaussian", "displaced"], default="half-gaussian")
    pt.add_argument("--sigma", type=float)
    pt.add_argument("--mu", type=float)
    pt.add_argument("--mu-t", type=float, help="target prior mean (displaced; inverted to mu, sigma)")
    pt.add_argument("--sigma-t2", type=float, help="target prior variance (displaced)")
    pt.add_argument("--cutoff", type=_cutoff, default="auto")
    pt.add_argument("--k-max", type=int)
    pt.add_argument("--json", action="store_true", help="print the record as JSON")

    sw = sub.add_parser("sweep", help="evaluate a grid and write CSV")
    sw.add_argument("--config", help="key=value file; command-line flags take precedence")
    sw.add_argument("--mode", choices=MODES)
    sw.add_argument("--fixed", type=float, help="fixed mu_t (fig2), sigma_t^2 (fig3) or mu (custom)")
    sw.add_argument("--grid", help="start:stop:count[:log]")
    sw.add_argument("--cutoff", type=_cutoff)
    sw.add_argument("--k-max", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--out", help="CSV path (default: stdout)")

    va = sub.add_parser("validate", help="run the self-checks")
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], help="comma-separated check numbers")
    va.add_argument("--json", action="store_true", help="print a machine-readable summary")
    va.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def _cmd_point(args):
    if args.prior == "half-gaussian":
        if args.sigma is None:
            raise UsageError("half-gaussian prior needs --sigma")
        if any(v is not None for v in (args.mu, args.mu_t, args.sigma_t2)):
            raise UsageError("half-gaussian prior takes only --sigma")
        row = evaluate_point("half-gaussian", args.sigma, None, args.cutoff, args.k_max)
    elif args.mu_t is not None or args.sigma_t2 is not None:
        if args.mu_t is None or args.sigma_t2 is None or args.mu is not None or args.sigma is not None:
            raise UsageError("give either --mu/--sigma or --mu-t/--sigma-t2")
        row = evaluate_point("moments", args.mu_t, args.sigma_t2, args.cutoff, args.k_max)
    else:
        if args.mu is None or args.sigma is None:
            raise UsageError("displaced prior needs --mu and --sigma (or --mu-t and --sigma-t2)")
        row = evaluate_point("displaced", args.mu, args.sigma, args.cutoff, args.k_max)
    if row["error"].startswith(("sigma must", "mu must", "targets must")):
        raise UsageError(row["error"])
    if args.json:
        print(json.dumps({k: row[k] for k in COLUMNS}))
    else:
        for k in COLUMNS:
            print(f"{k:>20}: {row[k]}")
    return EXIT_NUMERIC if row["error"] else EXIT_OK


_SWEEP_KEYS = ("mode", "fixed", "grid", "cutoff", "k_max", "seed", "workers", "out")


def _sweep_settings(args):
    conf = read_config(args.config) if args.config else {}
    unknown = set(conf) - set(_SWEEP_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for k in _SWEEP_KEYS:
        v = getattr(args, k)
        if v is not None:
            conf[k] = v
    if "mode" not in conf:
        raise UsageError("sweep needs --mode")
    try:
        mode = conf["mode"]
        grid = Grid.parse(str(conf.get("grid", DEFAULT_GRIDS.get(mode, ""))))
        cfg = SweepConfig(
            mode=mode, grid=grid,
            fixed=None if conf.get("fixed") is None else float(conf["fixed"]),
            cutoff=_cutoff(str(conf.get("cutoff", "auto"))),
            k_max=None if conf.get("k_max") is None else int(conf["k_max"]),
            seed=int(conf.get("seed", 0)),
            workers=int(conf.get("workers", 1)),
        )
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        raise UsageError(str(exc)) from None
    return cfg, conf.get("out")


def _cmd_sweep(args):
    cfg, out = _sweep_settings(args)
    if out is not None:
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write to {out}")
    rows = run_sweep(cfg)
    if out is None:
        write_csv(rows, sys.stdout, cfg)
    else:
        write_csv(rows, out, cfg)
    failed = sum(1 for r in rows if r["error"])
    if failed:
        print(f"{failed} of {len(rows)} points failed; see the error column", file=sys.stderr)
    return EXIT_NUMERIC if failed == len(rows) else EXIT_OK


def _cmd_validate(args):
    from .validation import run_checks

    results = run_checks(args.only, scale=args.tolerance_scale, seed=args.seed)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    if args.json:
        print(json.dumps({"passed": ok, "checks": [
            {"criterion": r.criterion, "name": r.name, "value": r.value,
             "tolerance": r.tolerance, "passed": r.passed} for r in results]}))
    return EXIT_OK if ok else EXIT_VALIDATION


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"point": _cmd_point, "sweep": _cmd_sweep, "validate": _cmd_validate}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"bayessep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bayessep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
