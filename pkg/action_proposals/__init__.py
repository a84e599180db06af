"""
Action Proposals Package.

Unsupervised spatio-temporal action proposals: actionness scoring, path
search, path-set association, gap completion and evaluation.
"""

__version__ = "1.0.0"
