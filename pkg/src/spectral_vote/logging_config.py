"""Logging configuration for spectral clustering and voting runs."""

import logging
import sys
from pathlib import Path

_CONSOLE_HANDLER_NAME = "spectral_vote.console"


def setup_logging(log_file: str = "spectral_vote.log", *, verbose: bool = False) -> None:
    """Set up logging configuration for the application.

    Args:
        log_file: Path to log file, defaults to 'spectral_vote.log'
        verbose: Lower the console threshold from ERROR to DEBUG

    Configures logging with:
    - INFO level and above
    - File output with timestamps
    - Module name identification
    - A single stderr console handler, so standard output stays clean
    """
    log_path = Path(log_file)

    # Create logs directory if needed
    if log_path.parent != Path():
        log_path.parent.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        filename=log_file,
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        filemode="a",  # Append to existing log file
    )

    root_logger = logging.getLogger()
    console_level = logging.DEBUG if verbose else logging.ERROR
    if verbose:
        root_logger.setLevel(logging.DEBUG)

    # Repeated calls (tests, library use) reuse the one console handler
    for handler in root_logger.handlers:
        if handler.get_name() == _CONSOLE_HANDLER_NAME:
            handler.setLevel(console_level)
            return

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.set_name(_CONSOLE_HANDLER_NAME)
    console_handler.setLevel(console_level)
    console_formatter = logging.Formatter("%(levelname)s - %(message)s")
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance for the specified module.

    Args:
        name: Module name, typically __name__

    Returns:
        Logger instance configured for the module
    """
    return logging.getLogger(name)
