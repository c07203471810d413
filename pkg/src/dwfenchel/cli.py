"""Command-line entry point: generate, solve, compare, aggregate."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

from .decomposition import METHODS, DecompositionConfig, run_method
from .harness import (
    BOOTSTRAP_RESAMPLES,
    CONFIDENCE_LEVEL,
    SAMPLE_INTERVAL,
    aggregate,
    read_trace,
    trace_to_csv,
    write_trace,
)
from .iterative_separation import DegenerateIntersection, IterationLimit
from .lp_core import NumericalFailure
from .separation import LiftingFailure, UnboundedSeparation
from .ufp import (
    ARC_DENSITY,
    K_PATHS,
    PERTURBATION_ROUNDS_PER_NODE,
    GenerationFailure,
    GeneratorParams,
    UfpInstance,
    build_problem,
    generate_instance,
    path_sets,
    perturb_capacities,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_NUMERICAL = 4
EXIT_TIME_LIMIT = 5

NUMERICAL_ERRORS = (NumericalFailure, UnboundedSeparation, DegenerateIntersection, IterationLimit, LiftingFailure)
RUN_METHODS = ("dw", "dw-momentum", "fenchel", "dwf", "dwf-iterative")

log = logging.getLogger("dwfenchel")


class UsageError(Exception):
    pass


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwfenchel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--dmax", type=int, required=True)
    g.add_argument("--capacity", type=int, required=True)
    g.add_argument("--arc-density", type=float, default=ARC_DENSITY)
    g.add_argument("--max-commodities", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--perturb-rounds", type=int, default=None,
                   help=f"capacity perturbation rounds (default {PERTURBATION_ROUNDS_PER_NODE} x nodes)")
    g.add_argument("-o", "--output", required=True)

    def run_flags(p):
        p.add_argument("--instance", required=True)
        p.add_argument("--tol", type=_positive(float), default=DecompositionConfig.tol)
        p.add_argument("--time-limit", type=_positive(float), default=math.inf)
        p.add_argument("--k-paths", type=_positive(int), default=K_PATHS)

    s = sub.add_parser("solve", help="run one method and emit its bound trace")
    run_flags(s)
    s.add_argument("--method", choices=sorted(METHODS), required=True)
    s.add_argument("--trace", default="-", help="trace CSV path ('-' for stdout)")

    c = sub.add_parser("compare", help="run several methods and report their gap to exact-enum")
    run_flags(c)
    c.add_argument("--methods", nargs="+", choices=RUN_METHODS, default=list(RUN_METHODS))
    c.add_argument("--trace-dir", default=None)

    a = sub.add_parser("aggregate", help="mean bounds with bootstrap intervals over traces")
    a.add_argument("traces", nargs="+")
    a.add_argument("--interval", type=_positive(float), default=SAMPLE_INTERVAL)
    a.add_argument("--resamples", type=_positive(int), default=BOOTSTRAP_RESAMPLES)
    a.add_argument("--level", type=float, default=CONFIDENCE_LEVEL)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--output", default="-")
    return parser


def _emit(text: str, target: str) -> None:
    if target == "-":
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    try:
        params = GeneratorParams(args.nodes, args.dmax, args.capacity, args.arc_density, args.max_commodities)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.perturb_rounds is not None and args.perturb_rounds < 0:
        raise UsageError("--perturb-rounds must be >= 0")
    try:
        instance = generate_instance(params, args.seed)
    except GenerationFailure as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    instance = perturb_capacities(instance, args.perturb_rounds, args.seed)
    instance.save(args.output)
    demands = [c.demand for c in instance.commodities]
    print(args.output)
    print(f"nodes={instance.nodes} arcs={len(instance.arcs)} commodities={len(demands)} "
          f"demand=[{min(demands)}, {max(demands)}] overflow_of_creation_paths="
          f"{instance.overflow(instance.metadata['certificate_paths'])}")
    return EXIT_OK


def _load_problem(args):
    try:
        instance = UfpInstance.load(args.instance)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read instance {args.instance}: {exc}") from None
    return build_problem(instance, path_sets(instance, args.k_paths)).problem


def cmd_solve(args) -> int:
    problem = _load_problem(args)
    config = DecompositionConfig(tol=args.tol, time_limit=args.time_limit)
    try:
        trace = run_method(args.method, problem, config)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(trace_to_csv(trace), args.trace)
    return EXIT_TIME_LIMIT if trace.status == "time_limit" else EXIT_OK


def cmd_compare(args) -> int:
    problem = _load_problem(args)
    config = DecompositionConfig(tol=args.tol, time_limit=args.time_limit)
    exact = run_method("exact-enum", problem).final_value
    print("method,final_value,exact_value,gap,status,rounds,seconds")
    worst = EXIT_OK
    for name in args.methods:
        start = time.perf_counter()
        try:
            trace = run_method(name, problem, config)
        except NUMERICAL_ERRORS as exc:
            print(f"{name},nan,{exact:.12g},nan,numerical_failure,0,{time.perf_counter() - start:.3f}")
            log.error("%s: %s", name, exc)
            worst = max(worst, EXIT_NUMERICAL)
            continue
        if args.trace_dir:
            Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
            write_trace(trace, Path(args.trace_dir) / f"{name}.csv")
        value = trace.final_value
        print(f"{name},{value:.12g},{exact:.12g},{abs(value - exact):.3g},{trace.status},"
              f"{len(trace.records)},{time.perf_counter() - start:.3f}")
    return worst


def cmd_aggregate(args) -> int:
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    try:
        traces = [read_trace(p) for p in args.traces]
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    series = aggregate(traces, args.interval, args.resamples, args.level, args.seed)
    _emit(series.to_csv(), args.output)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "compare": cmd_compare, "aggregate": cmd_aggregate}


def main(argv=None) -> int:
    level = os.environ.get("DECOMP_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
