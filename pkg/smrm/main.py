"""Command-line entry point: ``smrm <subcommand> --config FILE [--key value ...]``."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from smrm.core.config import settings
from smrm.core.errors import SmrmError
from smrm.core.logging import setup_logging
from smrm.features.export.service import write_error_record
from smrm.features.runs.schemas import RunConfig, Subcommand
from smrm.features.runs.service import RunService, load_run_config, normalise_key

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_ARTIFACT = 2


def build_parser() -> argparse.ArgumentParser:
    """Parser with one ``--key`` flag per RunConfig field."""
    parser = argparse.ArgumentParser(
        prog=settings.app_name, description=settings.description
    )
    parser.add_argument("--version", action="version", version=settings.version)
    parser.add_argument(
        "subcommand", choices=[s.value for s in Subcommand], help="What to run"
    )
    parser.add_argument("--config", type=Path, help="Flat key=value config file")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING...")
    overrides = parser.add_argument_group("config overrides")
    for name, field in RunConfig.model_fields.items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        overrides.add_argument(
            *flags,
            dest=f"override_{name}",
            default=argparse.SUPPRESS,
            metavar="VALUE",
            help=field.description,
        )
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        normalise_key(key[len("override_") :]): value
        for key, value in vars(args).items()
        if key.startswith("override_")
    }


def error_record(exc: Exception) -> Dict[str, Any]:
    """Machine-readable record for a structured or validation error."""
    if isinstance(exc, SmrmError):
        return exc.to_record()
    if isinstance(exc, ValidationError):
        return {
            "error": "invalid_config",
            "type": type(exc).__name__,
            "message": f"{exc.error_count()} invalid value(s) in {exc.title}",
            "details": {"errors": json.loads(exc.json(include_url=False))},
        }
    raise TypeError(f"no error record for {type(exc).__name__}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.log_level)
    overrides = collect_overrides(args)
    output_dir: Optional[Path] = None
    if "output_dir" in overrides:
        output_dir = Path(overrides["output_dir"])

    try:
        config = load_run_config(args.config, overrides)
        output_dir = config.output_dir
        summary = RunService(config).run(Subcommand(args.subcommand))
    except (SmrmError, ValidationError) as exc:
        record = error_record(exc)
        logger.error(f"{args.subcommand} failed: {record['message']}")
        write_error_record(output_dir, record)
        print(json.dumps(record, default=str), file=sys.stderr)
        return EXIT_ERROR

    missing: List[str] = summary.get("missing_artifacts", [])
    if missing:
        logger.error(f"Expected artifacts not found: {missing}")
        return EXIT_MISSING_ARTIFACT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
