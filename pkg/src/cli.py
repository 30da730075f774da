#!/usr/bin/env python3
"""
hilbund - command-line front end
Reads a JSON document, runs one subcommand and writes a JSON report.
"""
import argparse
import asyncio
import os
import sys
from typing import List, Optional

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dotenv import load_dotenv  # noqa: E402
from pydantic import ValidationError as PydanticValidationError  # noqa: E402

from src.model.report import Command, CommandName  # noqa: E402
from src.router.command_router import CommandRouter  # noqa: E402
from src.utils.logger import Logger  # noqa: E402
from src.utils.settings import Settings  # noqa: E402

load_dotenv()
logger = Logger.setup()

HELP = {
    CommandName.MVEE: "Löwner ellipsoid of a symmetric point set with its John certificate",
    CommandName.JOHN: "distortion between a body and a given enclosing ellipsoid",
    CommandName.RENORM_BUILD: "multi-valued Hilbert renorming of a bundle",
    CommandName.RENORM_VERIFY: "lower-semicontinuity witnesses along nets",
    CommandName.RENORM_SELECT: "single-valued selection with membership certificates",
    CommandName.HYPER_BUILD: "hyperspace Z_[n] and incidence space",
    CommandName.HYPER_ROUNDTRIP: "maps X -> Z_[n] against anchored branched covers",
    CommandName.HYPER_SLICE: "slicing and singleton continuity of a convex selection",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hilbund", description="Hilbert renormings of subhomogeneous bundles")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in CommandName:
        sub = commands.add_parser(name.value, help=HELP[name])
        sub.add_argument("--input", "-i", default=None, help="input JSON (stdin when omitted)")
        sub.add_argument("--output", "-o", default=None, help="report path (stdout when omitted)")
        sub.add_argument("--config", default=None, help="JSON file with settings")
        sub.add_argument("--epsilon", type=float, default=None, help="MVEE relative optimality gap")
        sub.add_argument("--tol", type=float, default=None, help="LSC / continuity tolerance")
        sub.add_argument("--max-iter", dest="max_iter", type=int, default=None, help="MVEE iteration limit")
        sub.add_argument("--svg", default=None, help="also draw planar objects to this SVG file")
        sub.add_argument("--seed", type=int, default=None, help="seed for sampled probes")
        sub.add_argument("--cap", type=int, default=None, help="enumeration cap for hyper-roundtrip")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the command and return its exit code."""
    args = build_parser().parse_args(argv)
    overrides = {
        "epsilon": args.epsilon,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "svg": args.svg,
        "seed": args.seed,
        "cap": args.cap,
    }
    try:
        settings = Settings.load(args.config)
    except (PydanticValidationError, OSError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return 2

    command = Command(
        name=CommandName(args.command),
        input_path=args.input,
        output_path=args.output,
        overrides={k: v for k, v in overrides.items() if v is not None},
    )
    code, _ = asyncio.run(CommandRouter(settings).dispatch(command))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
