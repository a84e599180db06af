"""
Box geometry: bounding boxes, feature histograms, detections, and the
frame-level and path-level overlap measures.
"""

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError

if TYPE_CHECKING:
    from .search import ActionPath

HISTOGRAM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BoundingBox:
    """
    Axis-aligned box stored center-based, as [x, y, w, h] with (x, y) the center.

    Attributes:
        frame: Frame index (>= 0)
        cx, cy: Center in pixels
        w, h: Width and height in pixels (> 0)
    """
    frame: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.frame < 0:
            raise InputError(f"box frame must be >= 0, got {self.frame}")
        if not (self.w > 0 and self.h > 0):
            raise InputError(f"box width and height must be > 0, got w={self.w}, h={self.h}")

    @classmethod
    def from_corners(cls, frame: int, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        """Build a box from corner coordinates."""
        return cls(frame, (x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def moved(self, frame: int, dx: float = 0.0, dy: float = 0.0) -> "BoundingBox":
        """Same size, translated and placed on another frame."""
        return BoundingBox(frame, self.cx + dx, self.cy + dy, self.w, self.h)

    def scaled(self, sx: float, sy: Optional[float] = None) -> "BoundingBox":
        """Same center, width and height multiplied."""
        return BoundingBox(self.frame, self.cx, self.cy, self.w * sx, self.h * (sx if sy is None else sy))

    def contains(self, other: "BoundingBox", tolerance: float = 1e-9) -> bool:
        """True when ``other`` lies entirely inside this box."""
        return (other.x1 >= self.x1 - tolerance and other.y1 >= self.y1 - tolerance
                and other.x2 <= self.x2 + tolerance and other.y2 <= self.y2 + tolerance)


class FeatureHistogram:
    """
    Non-negative feature vector L1-normalized on construction.

    Used for motion (HOF), color (HOC) and gradient (HOG) descriptors.
    The underlying array is read-only.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float]):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size == 0:
            raise InputError("histogram must have at least one bin")
        if not np.all(np.isfinite(arr)):
            raise InputError("histogram entries must be finite")
        if np.any(arr < 0):
            raise InputError("histogram entries must be >= 0")
        total = float(arr.sum())
        if total <= 0:
            raise InputError("histogram must have a positive sum")
        arr = arr / total
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    def distance(self, other: "FeatureHistogram") -> float:
        """Euclidean distance to another histogram of the same dimension."""
        if other.dim != self.dim:
            raise InputError(f"histogram dimension mismatch: {self.dim} vs {other.dim}")
        return float(np.linalg.norm(self._values - other._values))

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureHistogram):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._values, other._values))

    def __hash__(self) -> int:
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"FeatureHistogram({np.array2string(self._values, precision=4)})"


@dataclass(eq=False)
class Detection:
    """
    One frame-level scored box.

    Detections compare by identity: two records at the same place are
    still two distinct proposals.

    Attributes:
        box: Bounding box (carries the frame index)
        human_score: Human detector probability in [0, 1]
        motion_hist: Optical-flow histogram (HOF)
        color_hist: Color histogram (HOC)
        grad_hist: Gradient histogram (HOG)
        actionness: Combined score, filled in by scoring
        index: Position of the detection within its frame (tie-breaking)
        video: Video identifier
        shift: Median motion (dx, dy) of the box content to the next frame
    """
    box: BoundingBox
    human_score: float
    motion_hist: FeatureHistogram
    color_hist: FeatureHistogram
    grad_hist: FeatureHistogram
    actionness: Optional[float] = None
    index: int = 0
    video: str = ""
    shift: Tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        if not 0.0 <= self.human_score <= 1.0:
            raise InputError(f"human_score must be in [0, 1], got {self.human_score}")

    @property
    def frame(self) -> int:
        return self.box.frame

    @property
    def key(self) -> Tuple[int, int]:
        """(frame, index), the deterministic ordering key."""
        return (self.box.frame, self.index)

    def appearance(self) -> np.ndarray:
        """Concatenated color and gradient histograms."""
        return np.concatenate([self.color_hist.values, self.grad_hist.values])

    def require_actionness(self) -> float:
        if self.actionness is None:
            raise InputError(f"detection at frame {self.frame} index {self.index} has no actionness score")
        return self.actionness


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union of two boxes, ignoring their frame indices.

    Returns:
        Value in [0, 1]; 0 when the boxes are disjoint
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def appearance_distance(color_a: FeatureHistogram, color_b: FeatureHistogram,
                        grad_a: FeatureHistogram, grad_b: FeatureHistogram,
                        lambda_a: float) -> float:
    """||C(a) - C(b)|| + lambda_a * ||H(a) - H(b)||."""
    return color_a.distance(color_b) + lambda_a * grad_a.distance(grad_b)


def center_distance(color_a: np.ndarray, color_b: np.ndarray,
                    grad_a: np.ndarray, grad_b: np.ndarray, lambda_a: float) -> float:
    """Appearance distance between raw (already averaged) feature centers."""
    return float(np.linalg.norm(color_a - color_b) + lambda_a * np.linalg.norm(grad_a - grad_b))


def path_overlap(p: "ActionPath", q: "ActionPath") -> float:
    """
    Temporal-spatial overlap of two paths.

    The summed per-frame IoU over the shared frames is divided by the
    frame-index span max(t_e) - min(t_s) and clamped to [0, 1]. Two
    single-frame paths on the same frame fall back to the box IoU.

    Returns:
        Value in [0, 1]; 0 when the temporal spans are disjoint
    """
    if not p.detections or not q.detections:
        raise InputError("path_overlap needs non-empty paths")
    first = max(p.start_frame, q.start_frame)
    last = min(p.end_frame, q.end_frame)
    if first > last:
        return 0.0
    span = max(p.end_frame, q.end_frame) - min(p.start_frame, q.start_frame)
    if span == 0:
        return iou(p.detections[0].box, q.detections[0].box)
    total = math.fsum(iou(p.box_at(t), q.box_at(t)) for t in range(first, last + 1))
    return min(1.0, total / span)
