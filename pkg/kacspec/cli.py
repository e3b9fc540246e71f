"""
Command-line front end.

    python -m kacspec spectrum --s 0.5 --K 1000 --out spectrum.csv
    python -m kacspec diag-check --s 0.5 --K 20 --symbol l1 --format json

Exit codes: 0 on success, 2 for invalid input, 3 for accuracy failures and
tolerance breaches, 4 for disagreeing routes, 5 for output errors.
"""

import argparse
import logging
import sys
from typing import List, Optional

from kacspec import settings
from kacspec.errors import TOLERANCE_BREACH_EXIT, ConfigValidationError, KacspecError
from kacspec.experiments import EXPERIMENTS
from kacspec.experiments.artifacts import render, write_artifact
from kacspec.experiments.schemas import build_config

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    # every default is None so profile presets can fill what the user left out
    parser.add_argument("--s", type=float, help="singularity exponent in (0, 1)")
    parser.add_argument("--K", type=int, help="largest Hermite index")
    parser.add_argument("--d", type=int, help="velocity dimension (1..3)")
    parser.add_argument("--t", type=float, help="time (Mehler symbol, evolution horizon)")
    parser.add_argument("--symbol", choices=["l1", "l2", "full", "mehler"])
    parser.add_argument("--order", type=int, help="order of the asymptotic expansion")
    parser.add_argument("--half-width", dest="half_width", type=float, help="phase grid half-width")
    parser.add_argument("--points", type=int, help="phase grid points (power of two)")
    parser.add_argument("--tol", type=float, help="tolerance of the experiment")
    parser.add_argument("--seed", type=int, help="seed for random vectors")
    parser.add_argument("--profile", choices=["quick", "full"])
    parser.add_argument("--threads", type=int, help=f"worker threads (default {settings.KACSPEC_THREADS})")
    parser.add_argument("--format", dest="output_format", choices=["csv", "json"])
    parser.add_argument("--out", dest="output", help="output file; stdout when omitted")
    parser.add_argument("--matrix-out", dest="matrix_output", help="file for the full operator matrix (diag-check, mehler-check)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kacspec",
        description="Numerical experiments for the linearized non-cutoff Kac operator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.KACSPEC['version']}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    for record in EXPERIMENTS.list():
        sub = commands.add_parser(record.name, help=record.description, description=record.description)
        _add_common(sub)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    verbose = args.pop("verbose")
    logging.basicConfig(
        level=logging.DEBUG if verbose else settings.KACSPEC_LOG_LEVEL,
        format=settings.LOG_FORMAT,
        stream=sys.stderr,
    )

    try:
        config = build_config(**args)
        report = EXPERIMENTS.run(command, config)
        matrix = report.attachments.get("matrix")
        if config.matrix_output and matrix is None:
            raise ConfigValidationError(f"{command} builds no operator matrix")
        text = render(report, config.output_format)
        if config.output:
            write_artifact(text, config.output)
        else:
            sys.stdout.write(text)
        if config.matrix_output:
            write_artifact(render(matrix, config.output_format), config.matrix_output)
    except KacspecError as exc:
        logger.error("%s failed: %s", command, exc)
        diagnostic = getattr(exc, "diagnostic", None)
        if diagnostic:
            logger.error("diagnostic: %s", diagnostic)
        return exc.exit_code

    failed = report.failed_checks()
    if failed:
        logger.error("%s breached its tolerance: %s", command, ", ".join(failed))
        return TOLERANCE_BREACH_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
