"""Logging helpers producing `[component] message` lines."""

import logging
import sys
from typing import Optional

LOG_FORMAT = "[%(name)s] %(message)s"

_handler: Optional[logging.StreamHandler] = None


def configure_logging(quiet: bool = False, verbose: bool = False) -> None:
    """Install one stderr handler on the root logger, replacing the one from any earlier call.

    The handler binds the current `sys.stderr`; the previous handler is detached without
    touching its stream, which the host may already have closed.
    """
    global _handler
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(_handler)
    root.setLevel(level)


def get_logger(name: str) -> logging.Logger:
    """Logger named after the module it reports for."""
    return logging.getLogger(name)
