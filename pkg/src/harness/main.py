"""CLI entry point: ldg <mode> --config <path> [--out <path>].

Exit codes: 0 success, 2 config error, 3 numerical blow-up, 1 any other
solver error. CSV goes to --out, the config's `output`, or stdout; logs go
to stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import structlog

from src.harness import drivers
from src.harness.csvout import emit, field_csv
from src.shared.config import RunConfig, parse_config
from src.shared.errors import BlowUpError, ConfigError, LDGError

log = structlog.get_logger()

MODES = ("run", "convergence", "history", "projtest", "fluxtest")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BLOW_UP = 3


def configure_logging() -> None:
    structlog.configure(
        wrapper_class=structlog.make_filtering_bound_logger(
            getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldg", description="θ-flux LDG solver and verification harness")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, type=Path, help="key = value config file")
    parser.add_argument("--out", type=Path, default=None, help="CSV path (default: config output or stdout)")
    return parser


def load_config(path: Path, mode: str) -> RunConfig:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    config = parse_config(text)
    if config.mode is not None and config.mode != mode:
        raise ConfigError(f"config is for mode {config.mode!r}, invoked as {mode!r}", key="mode")
    return config.model_copy(update={"mode": mode})


def execute(config: RunConfig) -> str:
    """Run the configured driver and return its CSV text."""
    match config.mode:
        case "convergence":
            return drivers.convergence_csv(drivers.run_convergence(config))
        case "history":
            return drivers.history_csv(drivers.run_history(config))
        case "projtest":
            return drivers.projtest_csv(drivers.run_projtest(config))
        case "fluxtest":
            return drivers.fluxtest_csv(drivers.run_fluxtest(config))
        case _:
            snap = drivers.run_snapshot(config)
            if config.field_output:
                emit(field_csv(snap.field), config.field_output, sys.stdout)
            return drivers.snapshot_csv(snap)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = load_config(args.config, args.mode)
        log.info("ldg_start", mode=args.mode, problem=config.problem, degree=config.degree,
                 cells=config.cells, theta=config.theta, variant=config.variant)
        text = execute(config)
        emit(text, args.out or config.output, sys.stdout)
    except ConfigError as exc:
        log.error("config_error", error=str(exc), line=exc.line, key=exc.key)
        return EXIT_CONFIG
    except BlowUpError as exc:
        log.error("blow_up_abort", t=exc.t, max_norm=exc.max_norm)
        return EXIT_BLOW_UP
    except LDGError as exc:
        log.error("solver_error", error=str(exc), kind=type(exc).__name__)
        return EXIT_FAILURE
    log.info("ldg_done", mode=args.mode)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
