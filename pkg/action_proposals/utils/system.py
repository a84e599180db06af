"""
System utilities for the action proposal engine.
Provides CPU count, output directories and stage timing.
"""

import os
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional


def get_cpu_count() -> int:
    """Get the number of CPU cores available."""
    try:
        return os.cpu_count() or 1
    except Exception:
        return 1


def get_worker_count(requested: int, jobs: int) -> int:
    """
    Number of worker threads for a batch of jobs.

    Args:
        requested: Configured worker count
        jobs: Number of independent jobs

    Returns:
        Between 1 and min(requested, jobs, CPU count)
    """
    return max(1, min(requested, jobs, get_cpu_count()))


def ensure_directory(path: str) -> bool:
    """
    Ensure a directory exists, creating it if necessary.

    Returns:
        True if directory exists or was created, False on error
    """
    try:
        os.makedirs(path, exist_ok=True)
        return True
    except OSError:
        return False


@contextmanager
def timed(timings: Dict[str, float], name: str) -> Iterator[None]:
    """
    Add the wall time spent inside the block to ``timings[name]``.

    Args:
        timings: Accumulator, seconds per name
        name: Entry to add to
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def format_seconds(seconds: Optional[float]) -> str:
    """Short human readable duration."""
    if seconds is None:
        return "-"
    if seconds < 1.0:
        return f"{seconds * 1000:.0f} ms"
    return f"{seconds:.2f} s"
