"""
Logging setup for the command line.
"""

import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
DATE_FORMAT = "%H:%M:%S"


def verbosity_level(verbosity: int) -> int:
    """Map the number of -v flags to a logging level (WARNING, INFO, DEBUG)."""
    if verbosity >= 2:
        return logging.DEBUG
    if verbosity == 1:
        return logging.INFO
    return logging.WARNING


def setup_logging(verbosity: int = 0) -> None:
    """
    Send log records to stderr.

    Calling it again replaces the handler installed by a previous call.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_action_proposals", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    handler._action_proposals = True
    root.addHandler(handler)
    root.setLevel(verbosity_level(verbosity))
