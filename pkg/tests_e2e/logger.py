import logging
from typing import Optional

from config import get_config
from gainloss.ssh.logger import get_logger as get_package_logger
from gainloss.ssh.logger import setup_global_logging


def get_logger(name: str, log_file: Optional[str] = None) -> logging.Logger:
    """
    Get a logger for an acceptance module at the configured E2E level.

    Args:
        name: Logger name (typically __name__ of the calling module)
        log_file: Optional file path for logging output

    Returns:
        Configured logger instance
    """
    return get_package_logger(name, log_file, get_config().log_level)


def setup_suite_logging(log_file: Optional[str] = None) -> None:
    """
    Route the library's log lines through the same handlers as the suite.

    Args:
        log_file: Optional file path for logging output
    """
    setup_global_logging(get_config().log_level, log_file)
