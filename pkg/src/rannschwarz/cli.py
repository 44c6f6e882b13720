"""Command line entry point.

Subcommands::

    rannschwarz run        --config cfg.ini [--out DIR] [--seeds K]
    rannschwarz spectrum   --config cfg.ini [--out DIR]
    rannschwarz sweep-tau  --config cfg.ini [--taus 1e-4,1e-3,...]
    rannschwarz scaling    --config cfg.ini [--ns 2,3,4] [--override-caps]

Without ``--config`` the built-in defaults (Example 1, n=2, 4x4 subdomains,
m=16, 40x40 points, GMRES + AS) are used.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import runner
from .krylov import DenseSizeError

DEFAULT_TAUS = (1e-4, 1e-3, 1e-2, 1e-1)


def _floats(text: str) -> list:
    return [None if t.strip().lower() in ("off", "none") else float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file (unknown keys are rejected)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--seeds", metavar="K", type=int, help="number of seeds (overrides num_seeds)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rannschwarz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="fit once per seed and write summary.csv")
    sub.add_parser("spectrum", parents=[common], help="dense eigenvalues of H^T H and M^-1 H^T H")
    p = sub.add_parser("sweep-tau", parents=[common], help="PCA threshold sweep")
    p.add_argument("--taus", type=_floats, default=list(DEFAULT_TAUS), help="comma-separated thresholds")
    p = sub.add_parser("scaling", parents=[common], help="weak-scaling study on Example 1")
    p.add_argument("--ns", type=_ints, default=[2, 3, 4], help="comma-separated complexities n")
    p.add_argument("--preconditioners", default="none,AS", help="comma-separated list")
    p.add_argument("--override-caps", action="store_true", help=f"allow n > {runner.SCALING_CAP}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = runner.load_config(args.config) if args.config else runner.RunConfig()
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        seeds = args.seeds
        if args.command == "run":
            sums = runner.run(cfg, num_seeds=seeds)
            print(f"{len(sums)} seeds: median iter {np.median([s.iter for s in sums]):g}, "
                  f"median e_l2 {np.median([s.e_l2 for s in sums]):.3e} -> {cfg.output_dir}")
        elif args.command == "spectrum":
            ev_A, ev_MA = runner.spectrum_cmd(cfg)
            print(f"{len(ev_A)} eigenvalues; max real part of M^-1 H^T H: {ev_MA.real.max():.6g} -> {cfg.output_dir}")
        elif args.command == "sweep-tau":
            rows = runner.sweep_tau(cfg, args.taus, num_seeds=seeds)
            for r in rows:
                print(", ".join(f"{h}={v}" for h, v in zip(runner.SWEEP_HEADER, r)))
        elif args.command == "scaling":
            pcs = tuple(s.strip() for s in args.preconditioners.split(",") if s.strip())
            rows = runner.scaling_cmd(cfg, args.ns, num_seeds=seeds, preconditioners=pcs,
                                      override_caps=args.override_caps)
            for r in rows:
                print(", ".join(f"{h}={v}" for h, v in zip(runner.SCALING_HEADER, r)))
    except (ValueError, DenseSizeError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
