"""
Exception hierarchy for the action proposal engine.

Every failure the engine raises on purpose derives from ProposalError, so
the command line can turn it into one of the documented exit codes.
"""

from typing import Optional

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


class ProposalError(Exception):
    """Base class for all engine errors."""

    exit_code = EXIT_INTERNAL_ERROR


class InputError(ProposalError, ValueError):
    """Invalid input data, file contents or configuration."""

    exit_code = EXIT_INPUT_ERROR


class OracleLimitError(InputError):
    """An exhaustive oracle was asked to enumerate more than its guard allows."""


class InvariantError(ProposalError):
    """An internal invariant was violated."""

    exit_code = EXIT_INTERNAL_ERROR


class StageError(ProposalError):
    """
    A pipeline stage failed.

    Attributes:
        stage: Name of the stage (score, search, associate, complete, emit)
        video: Video identifier being processed, if known
        cause: The original exception
    """

    def __init__(self, stage: str, video: Optional[str], cause: BaseException):
        self.stage = stage
        self.video = video
        self.cause = cause
        where = f" (video {video!r})" if video is not None else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        return exit_code_for(self.cause)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code."""
    if isinstance(exc, ProposalError):
        return exc.exit_code
    return EXIT_INTERNAL_ERROR
