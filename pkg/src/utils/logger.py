"""Logging utilities for the toolkit."""

import logging

ROOT_LOGGER_NAME = "src"
_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def get_logger(name: str, level: int = logging.NOTSET) -> logging.Logger:
    """
    Return a logger for the given module name.

    Loggers inside the package propagate to the package root logger, which owns
    the single handler; anything else gets its own handler.

    Args:
        name: Logger name (typically __name__).
        level: Logging level (default NOTSET = inherit from the package root).

    Returns:
        Logger instance.
    """
    logger = logging.getLogger(name)
    if name == ROOT_LOGGER_NAME or not name.startswith(ROOT_LOGGER_NAME + "."):
        _attach_handler(logger)
    else:
        _attach_handler(logging.getLogger(ROOT_LOGGER_NAME))
    if level != logging.NOTSET:
        logger.setLevel(level)
    return logger


def configure_logging(verbosity: int = 1) -> logging.Logger:
    """
    Set the package-wide log level from a CLI verbosity count.

    Args:
        verbosity: 0 = WARNING, 1 = INFO, 2+ = DEBUG

    Returns:
        The package root logger.
    """
    levels = {0: logging.WARNING, 1: logging.INFO}
    root = get_logger(ROOT_LOGGER_NAME)
    root.setLevel(levels.get(verbosity, logging.DEBUG))
    return root


def _attach_handler(logger: logging.Logger) -> None:
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        logger.addHandler(handler)
        if logger.level == logging.NOTSET:
            logger.setLevel(logging.INFO)
