"""Utilities subpackage for the action proposal engine."""

from .system import ensure_directory, get_cpu_count, get_worker_count, timed
from .log import setup_logging

__all__ = ['ensure_directory', 'get_cpu_count', 'get_worker_count', 'timed', 'setup_logging']
