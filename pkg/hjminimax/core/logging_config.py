"""Structured logging for library code and experiment runs.

Library modules log through `get_logger(__name__)` with snake_case event
names and key-value context; the runner configures rendering once per run.
"""
import logging
import sys
from pathlib import Path

import structlog
from pythonjsonlogger import jsonlogger

FILE_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"

_SHARED_PROCESSORS = (
    structlog.contextvars.merge_contextvars,
    structlog.stdlib.add_log_level,
    structlog.stdlib.add_logger_name,
    structlog.processors.TimeStamper(fmt="iso"),
    structlog.processors.StackInfoRenderer(),
)


def _renderer(json_logs: bool):
    if json_logs:
        return structlog.processors.JSONRenderer(sort_keys=True)
    return structlog.dev.ConsoleRenderer(colors=False)


def _file_handler(log_file: Path, json_logs: bool) -> logging.Handler:
    log_file.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(log_file, encoding="utf-8")
    if json_logs:
        handler.setFormatter(jsonlogger.JsonFormatter(FILE_FORMAT))
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)-8s %(name)s: %(message)s"))
    return handler


def setup_logging(
    log_level: str = "INFO",
    json_logs: bool = False,
    log_file: Path | None = None
) -> None:
    """Route structlog events through stdlib logging to stderr and an optional file.

    stdout is left to the run summary printed by the experiment runner.
    """
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(_file_handler(Path(log_file), json_logs))
    logging.basicConfig(format="%(message)s", level=getattr(logging, log_level.upper()),
                        handlers=handlers, force=True)

    structlog.configure(
        processors=[*_SHARED_PROCESSORS, _renderer(json_logs)],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> structlog.BoundLogger:
    return structlog.get_logger(name)


def bind_run_context(**context) -> None:
    """Attach key-value context (subcommand, config path, seed) to every log event of a run."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(**context)


def log_level_for(verbosity: int) -> str:
    """Map a -v count from the command line to a log level name."""
    if verbosity >= 2:
        return "DEBUG"
    if verbosity == 1:
        return "INFO"
    return "WARNING"
