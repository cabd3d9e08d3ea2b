"""
backend/middleware/error_handler.py
Centralized logging setup and error-to-exit-code handling for the command line
"""

import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from backend.fairexp.utils.errors import ConfigurationError, DomainError, NumericError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None):
    """
    Configure the ``backend`` logger tree.

    Defaults come from FAIREXP_LOG_LEVEL and FAIREXP_LOG_DIR (a ``.env`` file is
    honoured). Log records go to stderr and, with a log dir, to fairexp.log.
    """
    load_dotenv()
    level = (level or os.getenv("FAIREXP_LOG_LEVEL", "INFO")).upper()
    log_dir = log_dir or os.getenv("FAIREXP_LOG_DIR")

    logger = logging.getLogger("backend")
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(formatter)
    logger.addHandler(stream)

    if log_dir:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(Path(log_dir) / "fairexp.log")
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    logger.propagate = False
    return logger


def default_parallel() -> int:
    """Worker pool size from FAIREXP_PARALLEL (default 1)."""
    load_dotenv()
    try:
        return max(1, int(os.getenv("FAIREXP_PARALLEL", "1")))
    except ValueError:
        return 1


class ErrorHandler:
    """Map exceptions raised by commands to exit codes and log them."""

    def __init__(self, logger_name: str = "backend.cli"):
        self.logger = logging.getLogger(logger_name)

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        if isinstance(error, NumericError):
            return EXIT_NUMERIC
        if isinstance(
            error,
            (
                ConfigurationError,
                DomainError,
                FileNotFoundError,
                json.JSONDecodeError,
            ),
        ):
            return EXIT_CONFIG
        return EXIT_FAILURE

    def handle(self, error: BaseException) -> int:
        """Report ``error`` on stderr and return the exit code for it."""
        code = self.exit_code_for(error)
        print(f"error: {error}", file=sys.stderr)
        if code == EXIT_FAILURE:
            self.logger.error(f"Internal error: {error}\n{traceback.format_exc()}")
        else:
            self.log_error(type(error).__name__, str(error))
        return code

    def log_error(self, error_type: str, message: str, context: dict = None):
        """Log custom errors."""
        log_msg = f"[{error_type}] {message}"
        if context:
            log_msg += f" - Context: {context}"
        self.logger.error(log_msg)
