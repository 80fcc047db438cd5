import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from logging_config import setup_logging
from routers import energy, minimize, multiplier, perimeter, report, sweep
from schemas.run import Command
from services.file_service import FileService
from utils.config_file import load_config, merge_overrides, write_config
from utils.dependencies import get_run_config
from utils.exceptions import ToolkitException, status

logger = logging.getLogger(__name__)

ROUTERS = (perimeter, energy, minimize, sweep, multiplier, report)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file ([run], [domain], [energy], ...)")
    common.add_argument("--output-dir", dest="run.output_dir")
    common.add_argument("--threads", dest="run.threads")
    common.add_argument("--cache-dir", dest="run.cache_dir", help="enables the on-disk weight cache")
    common.add_argument("--log-level", dest="run.log_level")

    parser = argparse.ArgumentParser(
        prog="phaselab",
        description="Nonlocal phase-coexistence energies, fractional perimeters and Gamma-limit experiments",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for router in ROUTERS:
        router.register(subparsers, parents=[common])
    return parser


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; 0 on success or PASS, 1 on failure, 2 on usage or config errors"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return status.EXIT_OK if not e.code else status.EXIT_USAGE

    try:
        config = load_config(args.config)
        merge_overrides(config, vars(args))
        rc = get_run_config(Command(args.command), config, args.config)
        out = FileService.ensure_output_dir(rc.output_dir)
        setup_logging(str(out / "logs"), config["run"].get("log_level"))
        logger.info(f"Command {args.command} with output in {out}")

        summary = args.handler(config, rc)
        write_config(out / "effective_config.ini", config)
        FileService.write_summary(out / "summary.json", summary)
        code = summary.get("exit_code", status.EXIT_OK)
        logger.info(f"Command {args.command} finished with exit code {code}")
        return code

    except ToolkitException as e:
        logger.error(f"{args.command} failed: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.status_code
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {str(e)}", exc_info=True)
        print(f"error: {str(e)}", file=sys.stderr)
        return status.EXIT_FAILED


if __name__ == "__main__":
    sys.exit(parse_and_dispatch(sys.argv[1:]))
