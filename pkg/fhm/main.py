import argparse
import logging
import sys
from typing import List, Optional

from .handlers.command_handler import CommandHandler
from .utils.config import settings

COMMANDS = {
    "solve": "solve the Dirichlet problem for a flat metric with --boundary data",
    "factor": "factor an annulus --metric as K* exp(a log|w|^2) K",
    "reconstruct": "rebuild a metric from a --factorization",
    "verify": "check flatness and boundary agreement of a --metric",
    "generate": "write a synthetic flat metric and its boundary data",
    "oracle-scalar": "independent scalar solve for n = 1 --boundary data",
    "certify": "max principle and C0 certificate on a --metric",
}


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--grid", help="grid size RxA, e.g. 64x128")
    parent.add_argument("--domain", default="annulus:0.5:1", help="annulus:R1:R2 or disc:R (generate)")
    parent.add_argument("--boundary", help="boundary data file (written by generate)")
    parent.add_argument("--metric", help="metric field file")
    parent.add_argument("--factorization", help="factorization file")
    parent.add_argument("--out", help="output file")
    parent.add_argument("--report", help="machine-readable JSON report")
    parent.add_argument("--tol", type=float, help="command tolerance (Newton residual, flatness, reconstruction)")
    parent.add_argument("--t-step", dest="t_step", type=float, help="initial continuation step")
    parent.add_argument("--max-newton", dest="max_newton", type=int, help="Newton iterations per stage")
    parent.add_argument("--seed", type=int, default=0)
    parent.add_argument("--dim", type=int, help="fiber dimension n (generate)")
    parent.add_argument("--degree", type=int, default=1, help="Laurent degree of the generator (generate)")
    parent.add_argument("--scale", type=float, default=0.3, help="Laurent coefficient scale (generate)")
    parent.add_argument("--exponents", help="comma-separated spectrum of a_true (generate)")
    parent.add_argument("--base-sigma", dest="base_sigma", type=float, help="base ring for factor")
    parent.add_argument("--base-theta", dest="base_theta", type=int, default=0, help="base angular index for factor")
    parent.add_argument("--tol-unitary", dest="tol_unitary", type=float, help="monodromy unitarity tolerance")
    parent.add_argument("--sensitivity", type=float, help="also report the response to a boundary perturbation of this relative size (solve)")
    parent.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhm", description="Flat hermitian metrics on the disc and the annulus")
    commands = parser.add_subparsers(dest="command", required=True)
    parent = _common_flags()
    for name, description in COMMANDS.items():
        commands.add_parser(name, parents=[parent], help=description, description=description)
    return parser


def configure_logging(verbose: int) -> None:
    level = {0: settings.LOG_LEVEL.upper(), 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one command and return its exit code (0, 2, 3 or 4)"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    configure_logging(args.verbose)
    return CommandHandler().run(args.command, args)


def main() -> None:
    sys.exit(run_cli())
