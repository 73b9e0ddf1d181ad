"""``sdn-evb`` command line."""
from __future__ import annotations

import argparse
import logging
import sys

from .ltl import LtlError
from .runner import EXIT_USAGE, MODES, RunOptions, UsageError, run
from .scenario import ScenarioError


def _nat(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("expected a non-negative integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sdn-evb",
        description="Explore, check and simulate guarded-event models of an SDN controller and its switches.",
        epilog="Exit status: 0 when every verdict holds, 1 on a property failure, 2 on bad usage or input. "
               "SDN_EVB_WORKERS sets the number of exploration threads.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--level", choices=("L0", "L1", "L2", "L3"), help="refinement level (default: scenario's)")
    p.add_argument("--depth", type=_nat, help="exploration depth bound")
    p.add_argument("--branch", type=_nat, help="at most this many successors per state")
    p.add_argument("--policy", choices=("exhaustive", "seeded", "priority"))
    p.add_argument("--seed", type=_nat)
    p.add_argument("--ltl", help="formula file, one formula per line (default: the shipped liveness set)")
    p.add_argument("--abstract", choices=("L0", "L1", "L2"),
                   help="refine-check: abstract level (default: every step down to L0)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--verbose", "-v", action="store_true", help="inline full states in traces, log progress")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    opts = RunOptions(
        scenario=args.scenario, out=args.out, level=args.level, depth=args.depth,
        branch=args.branch, policy=args.policy, seed=args.seed, ltl=args.ltl,
        abstract=args.abstract, verbose=args.verbose,
    )
    try:
        return run(args.mode, opts)
    except (ScenarioError, LtlError, UsageError, ValueError, OSError) as exc:
        print(f"sdn-evb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
