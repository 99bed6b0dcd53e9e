"""
Command-line entry point.

    python -m src.cli learn --data train.facts --modes modes.pl --nodes 4
    python -m src.cli eval  --data test.facts  --modes modes.pl --theory learned.pl
    python -m src.cli cv    --data all.facts   --modes modes.pl --folds 10
    python -m src.cli gen   --config generator.cfg --out stream.facts

Exit codes: 0 success, 2 configuration or input error, 3 transport error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from src.functions.dataIo import (
    StreamParseError,
    load_generator_config,
    load_modes,
    load_stream,
    load_theory,
    load_topology,
    render_stream,
    write_report,
    write_text,
)
from src.functions.evaluation import evaluate
from src.functions.streamGenerator import generate
from src.functions.termParser import TermSyntaxError
from src.models.HoeffdingParams import ConfigError, HoeffdingParams
from src.models.ModeDeclaration import ModeDeclarationError
from src.models.RunReport import RunReport
from src.models.StreamSpec import StreamSpec
from src.services.experimentRunner import TRANSPORTS, ExperimentRunner
from src.services.transport import TransportError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
LOG_LEVEL_ENV = "ECSTREAM_LOG_LEVEL"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="fact file of the stream")
    parser.add_argument("--modes", required=True, help="mode declaration file")
    parser.add_argument("--chunk-size", type=int, default=1, help="time points per interpretation")
    parser.add_argument("--out", help="write the key-value report here")


def _add_learning(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--nodes", type=int, default=1, help="processing nodes per learner group")
    parser.add_argument("--transport", choices=TRANSPORTS, default="inproc")
    parser.add_argument("--topology", help="socket topology file (nodes, mediator)")
    parser.add_argument("--delta", type=float, help="Hoeffding confidence parameter")
    parser.add_argument("--tie-threshold", type=float, help="tie-breaking threshold")
    parser.add_argument("--prune-threshold", type=float, help="pruning score threshold")
    parser.add_argument("--warm-up", type=int, help="minimum examples before a clause is output")
    parser.add_argument("--seed", type=int, default=0, help="mediator prioritization seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecstream", description="Distributed online learning of Event Calculus definitions"
    )
    parser.add_argument(
        "--log-level",
        default=os.getenv(LOG_LEVEL_ENV, "INFO"),
        help=f"logging level (default from {LOG_LEVEL_ENV}, else INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    learn = commands.add_parser("learn", help="learn a theory and score it")
    _add_common(learn)
    _add_learning(learn)
    learn.add_argument("--test", help="held-out fact file; defaults to the training stream")
    learn.add_argument("--theory-out", help="write the learned theory here")

    evaluate_cmd = commands.add_parser("eval", help="score a fixed theory on a stream")
    _add_common(evaluate_cmd)
    evaluate_cmd.add_argument("--theory", required=True, help="theory file to evaluate")

    cv = commands.add_parser("cv", help="cross-validate learning runs")
    _add_common(cv)
    _add_learning(cv)
    cv.add_argument("--folds", type=int, default=10)

    gen = commands.add_parser("gen", help="generate a synthetic stream")
    gen.add_argument("--config", required=True, help="generator config file")
    gen.add_argument("--out", required=True, help="fact file to write")
    gen.add_argument("--seed", type=int, help="override the config seed")
    return parser


def _params(args: argparse.Namespace) -> HoeffdingParams:
    return HoeffdingParams.from_env().with_overrides(
        delta=args.delta,
        tie_threshold=args.tie_threshold,
        prune_threshold=args.prune_threshold,
        warm_up=args.warm_up,
    )


def _runner(args: argparse.Namespace, modes) -> ExperimentRunner:
    topology = load_topology(args.topology) if args.topology else None
    nodes = args.nodes
    if topology is not None and nodes == 1 and len(topology.nodes) > 1:
        nodes = len(topology.nodes)
    return ExperimentRunner(modes, _params(args), nodes, args.transport, args.seed, topology)


def _emit(report: RunReport, out: Optional[str]) -> None:
    for line in report.summary_lines():
        print(line)
    if out:
        write_report(report, out)


def run_learn(args: argparse.Namespace) -> int:
    modes = load_modes(args.modes)
    spec = StreamSpec(args.data, args.chunk_size)
    train = load_stream(args.data, spec, modes)
    test = load_stream(args.test, spec, modes) if args.test else None
    report = _runner(args, modes).learn(train, test)
    if args.theory_out:
        write_text(args.theory_out, report.final_theory.render())
    _emit(report, args.out)
    return EXIT_OK


def run_eval(args: argparse.Namespace) -> int:
    modes = load_modes(args.modes)
    stream = load_stream(args.data, StreamSpec(args.data, args.chunk_size), modes)
    theory = load_theory(args.theory)
    result = evaluate(theory, stream, modes)
    report = RunReport(
        f1=result.f1,
        tp=result.tp,
        fp=result.fp,
        fn=result.fn,
        theory_size_literals=theory.size_literals,
        final_theory=theory,
    )
    _emit(report, args.out)
    return EXIT_OK


def run_cv(args: argparse.Namespace) -> int:
    modes = load_modes(args.modes)
    stream = load_stream(args.data, StreamSpec(args.data, args.chunk_size), modes)
    report = _runner(args, modes).cross_validate(stream, args.folds)
    _emit(report, args.out)
    return EXIT_OK


def run_gen(args: argparse.Namespace) -> int:
    config = load_generator_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    stream = generate(config)
    write_text(args.out, render_stream(stream))
    print(f"wrote {len(stream)} interpretations to {args.out}")
    return EXIT_OK


COMMANDS = {"learn": run_learn, "eval": run_eval, "cv": run_cv, "gen": run_gen}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown log level {args.log_level!r}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ModeDeclarationError, StreamParseError, TermSyntaxError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_CONFIG
    except TransportError as e:
        logger.error(f"{args.command}: transport failure: {e}")
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
