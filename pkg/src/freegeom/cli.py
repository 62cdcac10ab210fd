"""Command-line front end: ``freegeom --config PATH [--out DIR] [--seed U64] [--threads N] [--cap NODES]``.

Exit codes: 0 success, 2 invalid input, 3 node budget exceeded (reports are
still written, with overflow flagged), 4 the experiment itself failed.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_FAILED = 4


def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freegeom", description="Run a free-group geometry experiment from a config file.")
    p.add_argument("--config", required=True, type=Path, help="experiment config (INI)")
    p.add_argument("--out", type=Path, default=Path("out"), help="directory for CSV/JSON reports (default: out)")
    p.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    p.add_argument("--threads", type=_positive, default=1,
                   help="worker threads for numerical libraries; results do not depend on it")
    p.add_argument("--cap", type=_positive, default=None, help="override the node budget of searches")
    p.add_argument("--validate", action="store_true", help="only parse and validate the config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))

    from .bundle import CapExceeded
    from .config import ConfigError, load_config
    from .experiments import run, validate, write_report
    from .folding import FoldingError
    from .free_group import BudgetExceeded

    try:
        cfg = load_config(args.config)
        diags = validate(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for d in diags:
        print(f"{cfg.path}: {d}", file=sys.stderr)
    if any(d.level == "error" for d in diags):
        return EXIT_INVALID
    if args.validate:
        return EXIT_OK
    seed = cfg.seed if args.seed is None else args.seed
    cap = cfg.cap if args.cap is None else args.cap
    try:
        report = run(cfg, seed=seed, cap=cap)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CapExceeded, BudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FoldingError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for path in write_report(report, cfg, args.out, seed, cap):
        print(path)
    if report.overflow:
        print("budget exceeded: some rows overflowed the node cap (flagged in the report)", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK
