"""Command line entry point.

    fvtaxis run <config> [--out DIR] [--snapshots CADENCE]
    fvtaxis sweep <base> <overrides> [--out DIR] [--workers N]
    fvtaxis eps-study <base> [--eps 1e-1,1e-2,...] [--out DIR]
    fvtaxis converge <base> [--levels 3] [--mode space|time] [--field u|v] [--out DIR]
    fvtaxis check <config>

Exit codes: 0 success, 2 validation error, 3 solver nonconvergence,
4 invariant violation.  The default output root is $FVTAXIS_OUT (else ./runs).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load
from .errors import InvariantViolation, NonConvergence, SolverFailure
from .runner import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NONCONVERGENCE, EXIT_OK, run, sweep

log = logging.getLogger("fvtaxis")


def _out_root(args, name):
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("FVTAXIS_OUT", "runs")) / name


def _load_overrides(path):
    data = json.loads(Path(path).read_text())
    # {"m": [1.1, 1.5]} expands to one member per value
    if isinstance(data, dict):
        if len(data) != 1:
            raise ConfigError(["overrides: a dict form must have exactly one key"])
        (key, values), = data.items()
        data = [{key: v} for v in values]
    if not isinstance(data, list) or not all(isinstance(d, dict) for d in data):
        raise ConfigError(["overrides: expected a list of objects"])
    for d in data:
        # monitor lists follow m unless given explicitly
        if "m" in d:
            d.setdefault("alpha_list", None)
            d.setdefault("p_list", None)
    return data


def cmd_check(args):
    cfg = load(args.config)
    print(cfg.emit(), end="")
    return EXIT_OK


def cmd_run(args):
    cfg = load(args.config)
    out = _out_root(args, Path(args.config).stem)
    manifest = run(cfg, out, snapshot_every=args.snapshots)
    print(json.dumps({k: manifest[k] for k in ("status", "exit_status", "config_hash")}))
    if "error" in manifest:
        print(manifest["error"], file=sys.stderr)
    return manifest["exit_status"]


def cmd_sweep(args):
    base = load(args.base)
    overrides = _load_overrides(args.overrides)
    out = _out_root(args, Path(args.base).stem + "_sweep")
    rows = sweep(base, overrides, out, workers=args.workers)
    for r in rows:
        print(json.dumps(r, default=str))
    return EXIT_OK


def cmd_eps_study(args):
    from .verification import eps_limit_study

    base = load(args.base)
    eps = [float(x) for x in args.eps.split(",")]
    table = eps_limit_study(base, eps)
    out = _out_root(args, Path(args.base).stem + "_eps")
    out.mkdir(parents=True, exist_ok=True)
    (out / "eps_study.json").write_text(json.dumps(table, indent=2) + "\n")
    print(json.dumps(table, indent=2))
    return EXIT_OK


def cmd_converge(args):
    from .verification import self_convergence

    base = load(args.base)
    table = self_convergence(base, levels=args.levels, mode=args.mode, field=args.field)
    out = _out_root(args, Path(args.base).stem + "_converge")
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.json").write_text(json.dumps(table, indent=2) + "\n")
    print(json.dumps(table, indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fvtaxis", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="advance one config and write its artifacts")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--snapshots", type=float, default=None, help="field dump cadence (time)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a base config under a list of overrides")
    s.add_argument("base")
    s.add_argument("overrides", help='JSON list of override objects, or {"key": [values]}')
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("eps-study", help="eps -> 0 Cauchy study")
    s.add_argument("base")
    s.add_argument("--eps", default="1e-1,1e-2,1e-3,1e-4")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eps_study)

    s = sub.add_parser("converge", help="Richardson self-convergence study")
    s.add_argument("base")
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--mode", choices=["space", "time"], default="space")
    s.add_argument("--field", choices=["u", "v"], default="u")
    s.add_argument("--out")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("check", help="validate a config and print it with defaults")
    s.add_argument("config")
    s.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergence, SolverFailure) as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
