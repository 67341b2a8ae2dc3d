import logging
import sys
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from gainloss.ssh.config import get_settings

PACKAGE_LOGGER = "gainloss"


def get_logger(name: str, log_file: Optional[str] = None, level: Optional[str] = None,
               console: Optional[Console] = None) -> logging.Logger:
    """
    Get or create a logger with the specified name and configuration.

    Args:
        name: Logger name (typically __name__ of the calling module)
        log_file: Optional file path for logging output. If None, logs only to console.
        level: Log level; defaults to GAINLOSS_LOG_LEVEL.
        console: Rich console to write to; defaults to stderr.

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Return existing logger if already configured
    if logger.handlers:
        return logger

    logger.setLevel((level or get_settings().log_level).upper())

    console_handler = RichHandler(
        console=console or Console(stderr=True),
        rich_tracebacks=True,
        show_time=False,
        show_path=False
    )
    console_handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
        logger.addHandler(file_handler)

    # Don't propagate to root logger
    logger.propagate = False

    return logger


def setup_global_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure the package logger, capture warnings and log uncaught exceptions.

    Args:
        level: Log level; defaults to GAINLOSS_LOG_LEVEL.
        log_file: Optional file path for logging output

    Returns:
        The configured package logger
    """
    package_logger = get_logger(PACKAGE_LOGGER, log_file, level)
    if level:
        package_logger.setLevel(level.upper())

    logging.captureWarnings(True)
    warnings_logger = logging.getLogger("py.warnings")
    for handler in package_logger.handlers:
        if handler not in warnings_logger.handlers:
            warnings_logger.addHandler(handler)

    def handle_exception(exc_type, exc_value, exc_traceback):
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return

        package_logger.error(
            "Uncaught exception",
            exc_info=(exc_type, exc_value, exc_traceback)
        )

    sys.excepthook = handle_exception
    return package_logger
