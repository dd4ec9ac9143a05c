"""
Command-line driver.

    slotgame <command> <input.ia> [--cost-model FILE] [--mode over|under] [--m N]
             [--out FILE] [--dot FILE] [--csp FILE] [--oracle]

Exit codes: 0 SECURE, 10 LEAK, 11 POSSIBLE_LEAK, 12 UNSAFE, 2 usage or
parse error, 3 type or annotation error, 4 inconclusive.
"""

import argparse
import logging
import sys
from typing import List, Optional

from slotgame.config import Settings
from slotgame.errors import (
    ContextNotEmpty,
    InconclusiveError,
    MissingLow,
    SecurityAnnotationError,
    SlotGameError,
    TypeCheckError,
    UnboundedCost,
    UnsupportedType,
)
from slotgame.pipeline import COMMANDS, AnalysisPipeline, RunConfig

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_TYPE = 3
EXIT_INCONCLUSIVE = 4

_TYPE_ERRORS = (TypeCheckError, SecurityAnnotationError, ContextNotEmpty, MissingLow, UnsupportedType)
_INCONCLUSIVE = (InconclusiveError, UnboundedCost)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotgame",
        description="Detect timing leaks in second-order Idealized Algol terms with slot-game models.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("input", help="source file (.ia)")
    parser.add_argument("--cost-model", help="cost model file (default: every cost is 1)")
    parser.add_argument("--mode", choices=("over", "under"), default="under",
                        help="approximation of the free context (default: under)")
    parser.add_argument("--m", type=int, default=0,
                        help="argument evaluations per call in the under-approximation (default: 0)")
    parser.add_argument("--out", help="write the report (or exported text) to this file")
    parser.add_argument("--dot", help="also write the security model as DOT")
    parser.add_argument("--csp", help="also write the security model as a CSP script")
    parser.add_argument("--oracle", action="store_true",
                        help="cross-check check-timing with the operational semantics")
    parser.add_argument("--step-limit", type=int, help="step limit of operational runs")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def exit_code_for(error: SlotGameError) -> int:
    if isinstance(error, _TYPE_ERRORS):
        return EXIT_TYPE
    if isinstance(error, _INCONCLUSIVE):
        return EXIT_INCONCLUSIVE
    return EXIT_USAGE


def _configure_logging(level: str) -> None:
    known = level in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
    logging.basicConfig(
        level=level if known else "WARNING", format="[%(levelname)s] %(message)s", stream=sys.stderr, force=True,
    )
    if not known:
        logger.warning("ignoring SLOTGAME_LOG_LEVEL=%r (unknown level)", level)


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    settings = Settings.from_env()
    _configure_logging("INFO" if args.verbose else settings.log_level)
    try:
        config = RunConfig(
            command=args.command,
            input_path=args.input,
            cost_model_path=args.cost_model,
            mode=args.mode,
            m=args.m,
            output_path=args.out,
            dot_path=args.dot,
            csp_path=args.csp,
            step_limit=args.step_limit,
            oracle=args.oracle,
        )
        report = AnalysisPipeline(config, settings).run()
    except ValueError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_USAGE
    except SlotGameError as e:
        print(f"[ERROR] {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    except RecursionError:
        print("[ERROR] term too deeply nested", file=sys.stderr)
        return EXIT_USAGE

    print(report.text, end="")
    return report.exit_code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
