"""Command line entry point: ``chemovr <experiment> [options]``."""
from __future__ import annotations

import argparse
import sys

import numba

from .config import EXPERIMENTS, load_config
from .errors import ChemoVRError
from .experiments import RUNNERS


def set_workers(k: int | None) -> int:
    """Cap numba's thread pool; results do not depend on the count."""
    n = numba.config.NUMBA_NUM_THREADS
    if k is not None:
        if k < 1:
            raise ValueError("--workers must be >= 1")
        n = min(k, n)
    numba.set_num_threads(n)
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemovr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("--record-trajectory", action="store_true",
                        help="also write per-particle data")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        set_workers(args.workers)
        run = RUNNERS[args.experiment]
        if args.experiment in ("sweep", "vr"):
            res = run(cfg, record=args.record_trajectory)
        else:
            res = run(cfg)
    except (ChemoVRError, ValueError, OSError) as exc:
        print(f"chemovr: error: {exc}", file=sys.stderr)
        return 2
    for key, val in res.items():
        if isinstance(val, str):
            print(f"{key}: {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
