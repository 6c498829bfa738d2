"""Command line entry point.

Reads an instance (stdin or a file), runs the approximation and prints
the cost on its own line. Exit codes: 0 success, 1 parse or validation
failure, 2 supply imbalance, 3 solver failure.

Inputs are taken at face value: runtime grows with the log of the
aspect ratio of the given point set.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .instance import InstanceError, SupplyImbalanceError, load_instance
from .mwu import SolverFailure
from .oracle import OracleError, exact_emd
from .pipeline import approximate_emd
from .rounding import RoundingError
from .sketch import RoutingError


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _epsilon(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emdflow", description="Approximate Euclidean transportation cost (EMD) between signed point masses.")
    p.add_argument("input", nargs="?", help="instance file (default: stdin)")
    p.add_argument("--epsilon", type=_epsilon, default=0.25, help="target accuracy in (0, 1] (default 0.25)")
    p.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    p.add_argument("--trials", type=_positive_int, default=1, help="independent trials; the cheapest result is kept")
    p.add_argument("--eps0", type=float, default=None, help="subcell ratio 1/k with k even (overrides the default policy)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--estimate-only", action="store_true", help="print the graph flow cost and skip map extraction")
    mode.add_argument("--map", metavar="FILE", help="write the transportation map ('i j amount' lines) to FILE")
    p.add_argument("--oracle", action="store_true", help="also print the exact cost and the ratio (small inputs only)")
    p.add_argument("--stats", action="store_true", help="print graph and solver statistics to stderr")
    p.add_argument("--verbose", "-v", action="count", default=0, help="progress lines on stderr (repeat for more)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(name)s: %(message)s")

    try:
        if args.input is None:
            inst = load_instance(sys.stdin)
        else:
            with open(args.input) as fh:
                inst = load_instance(fh)
    except SupplyImbalanceError as exc:
        print(f"emdflow: {exc}", file=sys.stderr)
        return 2
    except (InstanceError, OSError) as exc:
        print(f"emdflow: {exc}", file=sys.stderr)
        return 1

    try:
        res = approximate_emd(inst, args.epsilon, args.seed, args.trials, eps0=args.eps0, with_map=not args.estimate_only)
    except ValueError as exc:
        print(f"emdflow: {exc}", file=sys.stderr)
        return 1
    except (SolverFailure, RoutingError, RoundingError) as exc:
        print(f"emdflow: solver failure: {exc}", file=sys.stderr)
        return 3

    print(repr(float(res.cost)))
    if args.map is not None:
        with open(args.map, "w") as fh:
            fh.write(res.map.to_text())
    if args.stats:
        rep = res.report
        print(
            f"seed={res.seed} eps0=1/{round(1 / res.eps0)} L={res.L} vertices={res.num_vertices} edges={res.num_edges} "
            f"flow_cost={res.flow_cost!r} mwu_rounds={rep.mwu_rounds} stages={rep.stages} "
            f"residual_sketch_norm={rep.residual_sketch_norm:.6g} seconds={res.seconds:.3f}",
            file=sys.stderr,
        )
    if args.oracle:
        try:
            exact = exact_emd(inst).cost
        except OracleError as exc:
            print(f"emdflow: {exc}", file=sys.stderr)
            return 1
        print(f"exact {exact!r}")
        print(f"ratio {res.cost / exact if exact > 0 else 1.0!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
