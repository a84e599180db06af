"""Shared fixtures: detection, path and scenario factories."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pytest

from action_proposals.core.geometry import BoundingBox, Detection, FeatureHistogram
from action_proposals.core.search import ActionPath

UNIFORM4 = [0.25, 0.25, 0.25, 0.25]


def detection(frame: int, cx: float = 50.0, cy: float = 50.0, w: float = 20.0, h: float = 40.0,
              human_score: float = 0.9, actionness: Optional[float] = None, index: int = 0,
              video: str = "v", color: Sequence[float] = UNIFORM4, grad: Sequence[float] = UNIFORM4,
              motion: Sequence[float] = UNIFORM4, shift: Tuple[float, float] = (0.0, 0.0)) -> Detection:
    return Detection(
        box=BoundingBox(frame, cx, cy, w, h),
        human_score=human_score,
        motion_hist=FeatureHistogram(motion),
        color_hist=FeatureHistogram(color),
        grad_hist=FeatureHistogram(grad),
        actionness=actionness,
        index=index,
        video=video,
        shift=shift,
    )


def straight_path(start: int, length: int, cx: float = 50.0, step: float = 0.0,
                  actionness: float = 1.0, **kwargs) -> ActionPath:
    """Path of identical boxes drifting ``step`` pixels per frame."""
    return ActionPath.from_detections([
        detection(start + k, cx=cx + step * k, actionness=actionness, **kwargs) for k in range(length)
    ])


def random_frames(rng: np.random.Generator, n_frames: int, max_boxes: int,
                  video: str = "v") -> List[List[Detection]]:
    """Small random instance: jittered boxes with random appearance and actionness."""
    frames = []
    for t in range(n_frames):
        frame = []
        for k in range(int(rng.integers(0, max_boxes + 1))):
            frame.append(detection(
                t,
                cx=float(rng.uniform(40.0, 60.0)),
                cy=float(rng.uniform(40.0, 60.0)),
                w=float(rng.uniform(18.0, 30.0)),
                h=float(rng.uniform(36.0, 60.0)),
                actionness=float(rng.uniform(0.01, 1.0)),
                index=k,
                video=video,
                color=rng.dirichlet(np.ones(4)),
                grad=rng.dirichlet(np.ones(4)),
            ))
        frames.append(frame)
    return frames


@pytest.fixture
def make_detection():
    return detection


@pytest.fixture
def make_path():
    return straight_path


@pytest.fixture
def make_random_frames():
    return random_frames


@pytest.fixture(autouse=True)
def _drop_cli_log_handlers():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_action_proposals", False):
            root.removeHandler(handler)
