import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from behavior import BehaviorError
from benchmarks import EXAMPLES, example_scenario
from experiments import SWEEP_PAIRS, run_scenario, run_sweep
from ilc import DivergentGainError
from reports import OutputError, emit_outputs, similarity_frame, summary_frame, write_sweep
from scenario import Scenario, ScenarioError, Tolerances, load_scenario
from similarity import DimensionMismatchError
from system_model import SystemValidationError
from transfer import TransferError

logger = logging.getLogger("app")

VERSION = "1.0.0"
DEFAULT_OUTPUT_DIR = "out"
DEFAULT_SWEEP_SEED = 0

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

# Verb -> (help, pipeline stage)
MENU = {
    "similarity": ("similarity verdict and indexes for every (host, guest) pair", "similarity"),
    "ilc": ("similarity analysis plus guest ILC runs for every task", "ilc"),
    "transfer": ("full pipeline: similarity, guest ILC, transfer to the host", "transfer"),
    "demo": ("full pipeline on a built-in example (example 1 unless told otherwise)", "transfer"),
    "sweep": ("transfer between random similar pairs, checked against the oracle", None),
}


class SweepFailure(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.py",
        description="Similarity analysis and experience transfer between LTV systems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    verbs = parser.add_subparsers(dest="verb", metavar="VERB", required=True)

    for verb, (help_text, stage) in MENU.items():
        sub = verbs.add_parser(verb, help=help_text, description=help_text)
        sub.add_argument("--out", type=Path, help=f"output directory (default: scenario output_dir, else ./{DEFAULT_OUTPUT_DIR})")
        if stage is None:
            sub.add_argument("--seed", type=int, default=DEFAULT_SWEEP_SEED, help="random seed")
            sub.add_argument("--pairs", type=int, default=SWEEP_PAIRS, help="number of random pairs")
            continue
        source = sub.add_mutually_exclusive_group(required=verb != "demo")
        source.add_argument("--scenario", type=Path, help="YAML scenario file")
        source.add_argument("--example", type=int, choices=sorted(EXAMPLES), help="built-in example")
        sub.add_argument("--tol", type=float, help="membership, similarity and experience tolerance")
        sub.add_argument("--gamma", type=float, help="ILC learning gain (default 1/sigma_max(G)^2)")
        sub.add_argument("--max-iters", type=int, help="ILC iteration limit")
        sub.add_argument("--allow-dissimilar", action="store_true", default=None, help="transfer even between dissimilar behaviors")
        sub.add_argument("--excel", action="store_true", help="also write report.xlsx")
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def resolve_scenario(args: argparse.Namespace) -> Scenario:
    """Load the scenario and apply command-line overrides on top of it."""
    if args.scenario is not None:
        scenario = load_scenario(args.scenario)
    else:
        scenario = example_scenario(args.example or 1)

    if args.tol is not None and args.tol <= 0.0:
        raise ScenarioError(f"--tol must be positive, got {args.tol}")
    if args.max_iters is not None and args.max_iters < 0:
        raise ScenarioError(f"--max-iters must not be negative, got {args.max_iters}")

    ilc = scenario.ilc
    if args.gamma is not None:
        ilc = replace(ilc, gamma=args.gamma)
    if args.max_iters is not None:
        ilc = replace(ilc, max_iters=args.max_iters)
    return scenario.with_overrides(
        tolerances=None if args.tol is None else Tolerances.uniform(args.tol),
        ilc=ilc,
        allow_dissimilar=args.allow_dissimilar,
    )


def output_directory(args: argparse.Namespace, scenario: Optional[Scenario] = None) -> Path:
    if args.out is not None:
        return args.out
    if scenario is not None and scenario.output_dir:
        return Path(scenario.output_dir)
    return Path(DEFAULT_OUTPUT_DIR)


def run_pipeline(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args)
    results = run_scenario(scenario, stage=MENU[args.verb][1])
    written = emit_outputs(results, output_directory(args, scenario), excel=args.excel)

    indexes = similarity_frame(results)
    if not indexes.empty:
        means = indexes.groupby(["host", "guest"], sort=False)["s_k"].mean().rename("mean_index")
        print(means.reset_index().to_string(index=False))
    if results.outcomes:
        print(summary_frame(results).to_string(index=False))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def run_sweep_command(args: argparse.Namespace) -> int:
    frame = run_sweep(args.seed, pairs=args.pairs)
    path = write_sweep(frame, output_directory(args))
    passed = int(frame["passed"].sum())
    print(f"{passed} of {len(frame)} pairs passed; wrote {path}")
    if passed != len(frame):
        raise SweepFailure(f"{len(frame) - passed} sweep pairs failed the transfer checks")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    configure_logging(args)

    try:
        if args.verb == "sweep":
            return run_sweep_command(args)
        return run_pipeline(args)
    except (TransferError, DivergentGainError, BehaviorError, SweepFailure) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except (ScenarioError, SystemValidationError, DimensionMismatchError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except OutputError as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
