"""App subpackage containing the command-line application."""

from .application import ProposalApp

__all__ = ['ProposalApp']
