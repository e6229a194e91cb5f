"""Command-line entry point.

Subcommands ``phase``, ``counterexample``, ``certify`` and ``audit`` each
write one CSV whose header block records every resolved setting. Exit code
0 means success, 1 a configuration error, 2 a runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import experiments as ex
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrupted-fourier",
        description="Monte Carlo experiments for sparse recovery from corrupted Fourier samples.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_ in [("phase", "recovery probability over an (n, m, k, gamma_c, lam) grid"),
                        ("counterexample", "Dirac comb under full sampling"),
                        ("certify", "dual certificate construction and verification"),
                        ("audit", "empirical checks of tail and golfing bounds")]:
        p = sub.add_parser(mode, help=help_)
        p.add_argument("--config", help="YAML file of experiment settings")
        p.add_argument("--seed", type=_seed)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output CSV path (default: <mode>.csv)")
        p.add_argument("--theory-mode", type=_bool, metavar="BOOL")
        p.add_argument("--desk-constants", type=_bool, metavar="BOOL")
        p.add_argument("--trials", type=int)
        if mode == "certify":
            p.add_argument("--corrupt-q", action="store_true",
                           help="overwrite one certificate entry with 1.5 before verification")
    return parser


def resolve_config(args) -> ex.ExperimentConfig:
    overrides = dict(mode=args.mode, seed=args.seed, jobs=args.jobs, out=args.out,
                     theory_mode=args.theory_mode, desk_constants=args.desk_constants,
                     trials=args.trials)
    if args.config:
        return ex.load_config(args.config, **overrides)
    data = {k: v for k, v in overrides.items() if v is not None}
    if args.mode == "counterexample":
        data.setdefault("n", [9])
        data.setdefault("lam", [0.5, 1.0, 2.0])
        data.setdefault("theory_mode", False)
    return ex.config_from_dict(data)


def run(cfg: ex.ExperimentConfig, corrupt_q: bool = False) -> str:
    out = cfg.out or f"{cfg.mode}.csv"
    if cfg.mode == "phase":
        ex.write_records(ex.run_phase_transition(cfg), out, cfg, _columns(ex.ExperimentRecord))
    elif cfg.mode == "certify":
        ex.write_records(ex.run_certificate_audit(cfg, corrupt_q=corrupt_q), out, cfg,
                         _columns(ex.CertificateRecord))
    elif cfg.mode == "counterexample":
        rows = [r for n in cfg.n for r in ex.run_counterexample(n, cfg.lam)]
        ex.write_records(rows, out, cfg, _columns(ex.CounterexampleRow))
    else:
        ex.write_records(ex.run_audit(cfg), out, cfg, ex.AUDIT_COLUMNS)
    return out


def _columns(cls):
    return [f.name for f in dataclasses.fields(cls)]


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; bad flags are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = run(cfg, corrupt_q=getattr(args, "corrupt_q", False))
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
