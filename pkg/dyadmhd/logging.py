"""
Log handlers for the ``dyadmhd`` logger hierarchy and elapsed-time markers around long computations.
"""

import contextlib
import logging
from pathlib import Path
from time import perf_counter
from typing import Optional, Union

from coloredlogs import ColoredFormatter

from dyadmhd import validation

LOGGER = logging.getLogger(__name__)

PACKAGE_LOGGER = "dyadmhd"
LOG_FORMAT = "%(levelname)-8s %(asctime)s %(name)s:%(lineno)d(%(threadName)s) %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


@validation.choices("level", LEVELS, doc=False)
def configure_logging_handler(
    level: str = "INFO",
    filename: Optional[Union[str, Path]] = None,
    name: str = PACKAGE_LOGGER,
) -> logging.Handler:
    """
    Installs a handler on logger ``name``: colored console output, or a plain file when ``filename`` is given.

    A handler of the same kind installed earlier by this function on the same logger is replaced, so repeated CLI invocations in one process do not duplicate records. The logger level is lowered to ``level`` when needed.
    """
    if filename is None:
        handler = logging.StreamHandler()
        handler.setFormatter(ColoredFormatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
    else:
        handler = logging.FileHandler(filename)
        handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
    handler.setLevel(level)
    handler._dyadmhd_kind = "console" if filename is None else "file"

    logger = logging.getLogger(name)
    for _old in list(logger.handlers):
        if getattr(_old, "_dyadmhd_kind", None) == handler._dyadmhd_kind:
            logger.removeHandler(_old)
            _old.close()
    if logger.getEffectiveLevel() > handler.level:
        logger.setLevel(level)
    logger.addHandler(handler)
    return handler


class Stopwatch:
    def __init__(self):
        self.start = perf_counter()
        self.elapsed: Optional[float] = None

    def stop(self) -> float:
        self.elapsed = perf_counter() - self.start
        return self.elapsed


@contextlib.contextmanager
def log_time(name, logger=LOGGER, severity=logging.INFO):
    """
    Logs ``started <name>`` on entry and ``finished <name> in <seconds>s`` on exit (also when the body raises). Yields a :class:`Stopwatch`.
    """
    watch = Stopwatch()
    logger.log(severity, f"started {name}")
    try:
        yield watch
    finally:
        logger.log(severity, f"finished {name} in {watch.stop():.3f}s")
