"""Command-line entry point.

    elastomap <generate|solve|reconstruct|validate|report|run> [--config FILE] [--<key> VALUE ...]

Flags mirror the run-configuration keys and override values read from the config file.
Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
"""

import argparse
import logging
import sys
from typing import NoReturn

from .config import RunConfig, load_run_config, settings
from .error_handling import ElastomapError, ExitCode, error_handler
from .pipeline import RUN_STAGES, run_pipeline
from .validation import OracleValidator

logger = logging.getLogger(__name__)

COMMANDS = {
    "generate": "Generate the reference modulus maps",
    "solve": "Solve the forward problem for every macroscopic load",
    "reconstruct": "Reconstruct modulus maps and error maps from the strain fields",
    "validate": "Run the closed-form oracle checks",
    "report": "Write report.txt (and the optional contrast sweep)",
    "run": "generate, solve, reconstruct and report in one go",
}


class CLIParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the usage code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(int(ExitCode.USAGE), f"{self.prog}: error: {message}\n")


def build_parser() -> CLIParser:
    parser = CLIParser(prog="elastomap", description="Modulus maps from strain maps.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CLIParser)
    for command, help_text in COMMANDS.items():
        sub = subparsers.add_parser(command, help=help_text, description=help_text)
        sub.add_argument("--config", type=str, default=None, help="Run configuration file (key = value lines)")
        sub.add_argument("--verbose", action="store_true", help="Debug logging")
        options = sub.add_argument_group("run configuration")
        for key, info in RunConfig.model_fields.items():
            options.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE", help=info.description)
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose or settings.debug else getattr(logging, settings.log_level)
    logging.basicConfig(level=level, format=settings.log_format, force=True)


def _validate(seed: str | None) -> int:
    summary = OracleValidator(seed=int(seed) if seed else 0).run_all()
    for check in summary.checks:
        status = "ok" if check.passed else "FAILED"
        print(f"{check.name:<22}{status:<8}{check.detail}")
    return int(ExitCode.SUCCESS if summary.passed else ExitCode.NUMERICAL)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    overrides = {key: getattr(args, key) for key in RunConfig.model_fields}

    if args.command == "validate" and args.config is None:
        return _validate(overrides["seed"])

    try:
        config = load_run_config(args.config, overrides)
    except ElastomapError as e:
        error_handler.log_error("load_config", e)
        print(f"elastomap: {e}", file=sys.stderr)
        return int(e.exit_code)
    except OSError as e:
        print(f"elastomap: cannot read configuration: {e}", file=sys.stderr)
        return int(ExitCode.IO)

    stages = RUN_STAGES if args.command == "run" else (args.command,)
    manifest = run_pipeline(config, stages)
    for record in manifest.stages:
        state = "ok" if record.ok else f"failed: {record.error}"
        print(f"{record.stage}: {state} ({len(record.artifacts)} artifacts)")
    report = config.output_dir / "report.txt"
    if manifest.exit_code == 0 and "report" in stages and report.exists():
        print(report.read_text(encoding="utf-8"), end="")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
