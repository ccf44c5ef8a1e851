"""
Structured logging setup
File: utils/logging_utils.py
"""
import logging
import sys
from typing import Any

import structlog

_CONFIGURED = False


def _stderr_logger(*args: Any) -> structlog.PrintLogger:
    # resolved per call so a swapped or closed stream is never cached
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(level: str = "WARNING", json_output: bool = False):
    """
    Configure structlog for the whole process

    Args:
        level: Minimum level name ('DEBUG', 'INFO', 'WARNING', ...)
        json_output: Render events as JSON lines instead of key=value text
    """
    global _CONFIGURED

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
    _CONFIGURED = True


def get_logger(component: str, **context: Any) -> Any:
    """
    Get a logger bound to a component name

    Args:
        component: Package-level component ('ca', 'vasp', 'bus', ...)
        **context: Extra key/value pairs bound to every event

    Returns:
        Bound structlog logger
    """
    if not _CONFIGURED:
        configure_logging()
    return structlog.get_logger(component=component, **context)
