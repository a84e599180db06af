"""
Track completion.

The paths of one actor leave temporal gaps. Gaps are filled frame by
frame by tracking-by-detection: candidate windows around the previous
box (shifted by the box motion) are scored with an online linear
classifier over the combined color and gradient features, the best one
is kept and fed back to the classifier as a new positive.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np
from sklearn.linear_model import SGDClassifier

from .association import PathSet
from .config import CompletionConfig, LinkConfig
from .errors import InputError
from .geometry import BoundingBox, Detection, center_distance, iou
from .search import ActionPath

logger = logging.getLogger(__name__)

Shift = Tuple[float, float]
Example = Union[Detection, np.ndarray]


class BoxSource(Enum):
    """Where a track box comes from."""
    DETECTED = "detected"
    COMPLETED = "completed"


@dataclass(frozen=True)
class TrackEntry:
    """
    One frame of a track.

    Attributes:
        frame: Frame index
        box: Box on that frame
        source: DETECTED for boxes taken from paths, COMPLETED for filled gaps
        actionness: Actionness of the detected box (0 for completed boxes)
        detection: The detection record, when known
    """
    frame: int
    box: BoundingBox
    source: BoxSource = BoxSource.DETECTED
    actionness: float = 0.0
    detection: Optional[Detection] = field(default=None, compare=False, repr=False)


@dataclass
class Track:
    """
    Boxes of one actor ordered by frame.

    Attributes:
        entries: Entries with strictly increasing frames
        video: Video identifier
        track_id: Index of the track within its video
        open_gaps: (first, last) frame ranges left unfilled
    """
    entries: List[TrackEntry]
    video: str = ""
    track_id: int = 0
    open_gaps: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            raise InputError("a track needs at least one box")
        for a, b in zip(self.entries, self.entries[1:]):
            if b.frame <= a.frame:
                raise InputError(f"track frames must be strictly increasing ({a.frame} then {b.frame})")

    @classmethod
    def from_paths(cls, paths: Sequence[ActionPath], video: str = "", track_id: int = 0) -> "Track":
        """
        Union of the paths' boxes.

        When several paths cover a frame, the detection with the highest
        actionness (then lowest index) is kept.
        """
        per_frame: Dict[int, Detection] = {}
        for path in paths:
            for detection in path.detections:
                current = per_frame.get(detection.frame)
                if current is None or (-detection.actionness, detection.index) < (-current.actionness, current.index):
                    per_frame[detection.frame] = detection
        entries = [
            TrackEntry(frame, d.box, BoxSource.DETECTED, d.require_actionness(), d)
            for frame, d in sorted(per_frame.items())
        ]
        return cls(entries, video=video, track_id=track_id)

    @property
    def frames(self) -> List[int]:
        return [e.frame for e in self.entries]

    @property
    def start_frame(self) -> int:
        return self.entries[0].frame

    @property
    def end_frame(self) -> int:
        return self.entries[-1].frame

    @property
    def duration(self) -> int:
        """Frame span, last - first + 1."""
        return self.end_frame - self.start_frame + 1

    @property
    def score(self) -> float:
        """Summed actionness of the detected boxes."""
        return math.fsum(e.actionness for e in self.entries)

    @property
    def is_contiguous(self) -> bool:
        return len(self.entries) == self.duration

    def entry_at(self, frame: int) -> Optional[TrackEntry]:
        index = frame - self.start_frame
        if 0 <= index < len(self.entries) and self.entries[index].frame == frame:
            return self.entries[index]
        for entry in self.entries:
            if entry.frame == frame:
                return entry
        return None

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        entry = self.entry_at(frame)
        return entry.box if entry else None

    def gaps(self) -> List[Tuple[int, int]]:
        """Missing (first, last) frame ranges between the first and last box."""
        out = []
        for a, b in zip(self.entries, self.entries[1:]):
            if b.frame > a.frame + 1:
                out.append((a.frame + 1, b.frame - 1))
        return out

    def split_contiguous(self) -> List["Track"]:
        """Cut the track at every missing frame."""
        pieces: List[List[TrackEntry]] = [[self.entries[0]]]
        for a, b in zip(self.entries, self.entries[1:]):
            if b.frame == a.frame + 1:
                pieces[-1].append(b)
            else:
                pieces.append([b])
        return [Track(piece, video=self.video, track_id=self.track_id) for piece in pieces]


class _ActorGroup:
    def __init__(self, path: ActionPath):
        self.paths = [path]
        self.frames = set(path.frames)
        self._color_sum = path.color_center * path.duration
        self._grad_sum = path.grad_center * path.duration
        self._count = path.duration

    def distance(self, path: ActionPath, lambda_a: float) -> float:
        return center_distance(self._color_sum / self._count, path.color_center,
                               self._grad_sum / self._count, path.grad_center, lambda_a)

    def add(self, path: ActionPath) -> None:
        self.paths.append(path)
        self.frames.update(path.frames)
        self._color_sum = self._color_sum + path.color_center * path.duration
        self._grad_sum = self._grad_sum + path.grad_center * path.duration
        self._count += path.duration


def split_actor_tracks(path_set: PathSet, link: Optional[LinkConfig] = None,
                       video: str = "", first_track_id: int = 0) -> List[Track]:
    """
    Divide a path set into per-actor tracks.

    Paths are taken by score; a path joins the first group that shares no
    frame with it and whose appearance center is within eta_f, otherwise
    it opens a new group.

    Returns:
        One Track per group, numbered from first_track_id
    """
    link = link or LinkConfig()
    groups: List[_ActorGroup] = []
    for path in sorted(path_set.paths, key=lambda p: -p.score):
        for group in groups:
            if group.frames.isdisjoint(path.frames) and group.distance(path, link.lambda_a) <= link.eta_f:
                group.add(path)
                break
        else:
            groups.append(_ActorGroup(path))
    return [Track.from_paths(group.paths, video=video, track_id=first_track_id + k)
            for k, group in enumerate(groups)]


@runtime_checkable
class AppearanceSource(Protocol):
    """Anything that can describe an arbitrary box by its color+gradient feature."""

    def describe(self, box: BoundingBox) -> np.ndarray:
        ...


class DetectionAppearance:
    """
    Appearance of arbitrary windows estimated from the detections of a video.

    A window takes the histograms of the same-frame detections weighted by
    their IoU with it; a window touching no detection gets a zero vector.
    """

    def __init__(self, frames: Sequence[Sequence[Detection]]):
        self._frames = frames
        self._dim = next((d.appearance().size for frame in frames for d in frame), 0)
        self.frame_size: Optional[Tuple[float, float]] = None

    def describe(self, box: BoundingBox) -> np.ndarray:
        feature = np.zeros(self._dim)
        if not 0 <= box.frame < len(self._frames):
            return feature
        total = 0.0
        for detection in self._frames[box.frame]:
            weight = iou(box, detection.box)
            if weight > 0:
                feature += weight * detection.appearance()
                total += weight
        if total > 0:
            feature /= total
        return feature


class OnlineClassifier:
    """
    Linear classifier trained by stochastic hinge-loss updates.

    Wraps an SGDClassifier. All examples seen so far are kept; every update
    runs a few epochs of partial_fit over the whole buffer in a seeded
    random order.
    """

    CLASSES = np.array([-1, 1])

    def __init__(self, dim: int, learning_rate: float = 0.1,
                 regularization: float = 1e-4, seed: int = 0):
        if dim < 1:
            raise InputError(f"classifier dimension must be >= 1, got {dim}")
        self._dim = dim
        self.learning_rate = learning_rate
        self.regularization = regularization
        self.n_positives = 0
        self.n_negatives = 0
        self._rng = np.random.default_rng(seed)
        self._model = SGDClassifier(loss="hinge", penalty="l2", alpha=regularization,
                                    learning_rate="constant", eta0=learning_rate,
                                    shuffle=False, random_state=seed)
        self._fitted = False
        self._examples: List[np.ndarray] = []
        self._labels: List[int] = []

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def weights(self) -> np.ndarray:
        return self._model.coef_[0] if self._fitted else np.zeros(self._dim)

    @property
    def bias(self) -> float:
        return float(self._model.intercept_[0]) if self._fitted else 0.0

    def _add(self, features: Sequence[np.ndarray], label: int) -> None:
        for x in features:
            x = np.asarray(x, dtype=float).reshape(-1)
            if x.size != self.dim:
                raise InputError(f"feature dimension {x.size} does not match classifier dimension {self.dim}")
            self._examples.append(x)
            self._labels.append(label)
            if label > 0:
                self.n_positives += 1
            else:
                self.n_negatives += 1

    def _run_epochs(self, epochs: int) -> None:
        X = np.vstack(self._examples)
        y = np.asarray(self._labels)
        for _ in range(epochs):
            order = self._rng.permutation(len(y))
            self._model.partial_fit(X[order], y[order], classes=self.CLASSES)
            self._fitted = True

    def fit(self, positives: Sequence[np.ndarray], negatives: Sequence[np.ndarray], epochs: int = 20) -> "OnlineClassifier":
        if len(positives) == 0 or len(negatives) == 0:
            raise InputError("classifier needs at least one positive and one negative example")
        self._add(positives, 1)
        self._add(negatives, -1)
        self._run_epochs(epochs)
        return self

    def update(self, positive: np.ndarray, negatives: Sequence[np.ndarray] = (), epochs: int = 3) -> None:
        """Add one positive (and its negatives) and retrain over the buffer."""
        self._add([positive], 1)
        self._add(negatives, -1)
        self._run_epochs(epochs)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self._fitted:
            return np.zeros(X.shape[0])
        return self._model.decision_function(X)

    def score(self, x: np.ndarray) -> float:
        return float(self.decision_function(x)[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def _features(items: Sequence[Example]) -> List[np.ndarray]:
    return [item.appearance() if isinstance(item, Detection) else np.asarray(item, dtype=float)
            for item in items]


def train_classifier(positives: Sequence[Example], negatives: Sequence[Example],
                     config: Optional[CompletionConfig] = None, seed: int = 0) -> OnlineClassifier:
    """
    Train the frame-level detector of one track.

    Args:
        positives: Track boxes (detections or feature vectors)
        negatives: Boxes excluded from the track and random boxes around positives
        config: Learning rate, regularization and epoch count
        seed: Seed of the example order

    Raises:
        InputError: if either class is empty
    """
    config = config or CompletionConfig()
    pos = _features(positives)
    neg = _features(negatives)
    if not pos or not neg:
        raise InputError("classifier needs at least one positive and one negative example")
    classifier = OnlineClassifier(pos[0].size, config.learning_rate, config.regularization, seed)
    return classifier.fit(pos, neg, epochs=config.epochs)


def _clip(box: BoundingBox, bounds: Optional[Tuple[float, float]]) -> Optional[BoundingBox]:
    if bounds is None:
        return box
    width, height = bounds
    x1, y1 = max(0.0, box.x1), max(0.0, box.y1)
    x2, y2 = min(width, box.x2), min(height, box.y2)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None
    if (x1, y1, x2, y2) == box.corners():
        return box
    return BoundingBox.from_corners(box.frame, x1, y1, x2, y2)


def generate_search_windows(prev: BoundingBox, shift: Shift = (0.0, 0.0),
                            config: Optional[CompletionConfig] = None,
                            frame: Optional[int] = None,
                            frame_bounds: Optional[Tuple[float, float]] = None) -> List[BoundingBox]:
    """
    Scan windows for the box following ``prev``.

    The previous box is moved by ``shift``; the search region is that box
    enlarged by search_scale. Windows of every scale factor are placed on a
    grid of integer multiples of the stride around the shifted center,
    keeping those that fit inside the region, then clipped to the frame.

    Args:
        prev: Box on the known frame
        shift: Box motion (dx, dy) towards the target frame
        config: Scales, region factor and stride
        frame: Target frame (defaults to the frame after prev)
        frame_bounds: Optional (width, height) to clip against

    Returns:
        Distinct windows, scale by scale, row by row
    """
    config = config or CompletionConfig()
    frame = prev.frame + 1 if frame is None else frame
    dx, dy = shift
    shifted = BoundingBox(frame, prev.cx + dx, prev.cy + dy, prev.w, prev.h)
    region = shifted.scaled(config.search_scale)
    stride = max(1, math.floor(config.stride_fraction * prev.w))

    windows: List[BoundingBox] = []
    seen = set()
    for scale in config.scales:
        w, h = prev.w * scale, prev.h * scale
        half_x, half_y = (region.w - w) / 2.0, (region.h - h) / 2.0
        if half_x < 0 or half_y < 0:
            continue
        kx = math.floor(half_x / stride + 1e-9)
        ky = math.floor(half_y / stride + 1e-9)
        for iy in range(-ky, ky + 1):
            for ix in range(-kx, kx + 1):
                window = _clip(BoundingBox(frame, shifted.cx + ix * stride, shifted.cy + iy * stride, w, h),
                               frame_bounds)
                if window is None:
                    continue
                key = tuple(round(v, 6) for v in window.corners())
                if key not in seen:
                    seen.add(key)
                    windows.append(window)
    return windows


def sample_negatives(box: BoundingBox, rng: np.random.Generator,
                     config: Optional[CompletionConfig] = None,
                     frame_bounds: Optional[Tuple[float, float]] = None,
                     count: Optional[int] = None) -> List[BoundingBox]:
    """
    Random boxes around ``box`` with IoU below negative_iou.

    Offsets are uniform within +-negative_offset of the box width/height;
    sampling gives up after 50 attempts per requested box.
    """
    config = config or CompletionConfig()
    count = config.negatives_per_positive if count is None else count
    out: List[BoundingBox] = []
    attempts = 0
    while len(out) < count and attempts < 50 * max(count, 1):
        attempts += 1
        ox = rng.uniform(-config.negative_offset, config.negative_offset) * box.w
        oy = rng.uniform(-config.negative_offset, config.negative_offset) * box.h
        candidate = _clip(BoundingBox(box.frame, box.cx + ox, box.cy + oy, box.w, box.h), frame_bounds)
        if candidate is not None and iou(candidate, box) < config.negative_iou:
            out.append(candidate)
    return out


def _frame_bounds(config: CompletionConfig, appearance: Optional[AppearanceSource]) -> Optional[Tuple[float, float]]:
    return config.frame_bounds or getattr(appearance, "frame_size", None)


def build_track_classifier(track: Track, frames: Sequence[Sequence[Detection]],
                           config: Optional[CompletionConfig] = None,
                           appearance: Optional[AppearanceSource] = None,
                           rng: Optional[np.random.Generator] = None) -> Optional[OnlineClassifier]:
    """
    Train the classifier of one track.

    Positives are the track's detections. Negatives are the video's
    detections outside the track, plus random boxes around the positives
    when an appearance source can describe them; each kind is capped at
    max_negatives.

    Returns:
        The classifier, or None when no negative example exists
    """
    config = config or CompletionConfig()
    rng = rng or np.random.default_rng(0)
    positives = [e.detection for e in track.entries if e.detection is not None]
    if not positives:
        return None
    members = {id(d) for d in positives}
    outside = [d for frame in frames for d in frame if id(d) not in members]
    if len(outside) > config.max_negatives:
        keep = np.sort(rng.choice(len(outside), size=config.max_negatives, replace=False))
        outside = [outside[i] for i in keep]
    negatives: List[Example] = list(outside)

    if appearance is not None and config.negatives_per_positive > 0:
        bounds = _frame_bounds(config, appearance)
        sampled: List[np.ndarray] = []
        for i in rng.permutation(len(positives)):
            for box in sample_negatives(positives[i].box, rng, config, bounds):
                sampled.append(appearance.describe(box))
            if len(sampled) >= config.max_negatives:
                break
        negatives.extend(sampled[:config.max_negatives])

    if not negatives:
        logger.warning(f"Track {track.track_id} of {track.video!r} has no negative examples; "
                       f"gaps fall back to the box motion")
        return None
    return train_classifier(positives, negatives, config, seed=int(rng.integers(2 ** 31)))


class _Completer:
    """Frame-by-frame gap filling for one track."""

    def __init__(self, entries: Dict[int, TrackEntry], config: CompletionConfig,
                 classifier: Optional[OnlineClassifier], appearance: Optional[AppearanceSource],
                 shifts: Optional[Dict[int, Shift]], rng: np.random.Generator):
        self.entries = entries
        self.config = config
        self.classifier = classifier
        self.appearance = appearance
        self.shifts = shifts or {}
        self.rng = rng
        self.bounds = _frame_bounds(config, appearance)
        self.completed = 0
        # forward motion used to reach each completed frame
        self._carried: Dict[int, Shift] = {}

    def _own_shift(self, frame: int) -> Shift:
        entry = self.entries.get(frame)
        if entry is not None and entry.detection is not None:
            return entry.detection.shift
        return self._carried.get(frame, (0.0, 0.0))

    def motion(self, prev: TrackEntry, target: int) -> Shift:
        if target > prev.frame:
            return self.shifts.get(prev.frame, self._own_shift(prev.frame))
        dx, dy = self.shifts.get(target, self._own_shift(prev.frame))
        return (-dx, -dy)

    def select(self, windows: List[BoundingBox], fallback: BoundingBox) -> BoundingBox:
        if not windows or self.classifier is None or self.appearance is None:
            return fallback
        features = np.vstack([self.appearance.describe(w) for w in windows])
        scores = self.classifier.decision_function(features)
        if float(np.ptp(scores)) <= 1e-12:
            return fallback
        # ties go to the window closest to the shifted box
        tied = np.flatnonzero(scores >= scores.max() - 1e-12)
        return windows[max(tied, key=lambda i: (iou(windows[i], fallback), -i))]

    def step(self, prev: TrackEntry, target: int) -> TrackEntry:
        shift = self.motion(prev, target)
        windows = generate_search_windows(prev.box, shift, self.config, frame=target, frame_bounds=self.bounds)
        shifted = BoundingBox(target, prev.box.cx + shift[0], prev.box.cy + shift[1], prev.box.w, prev.box.h)
        chosen = self.select(windows, _clip(shifted, self.bounds) or shifted)
        entry = TrackEntry(target, chosen, BoxSource.COMPLETED, 0.0)
        self.entries[target] = entry
        self._carried[target] = shift if target > prev.frame else (-shift[0], -shift[1])
        self.completed += 1
        if self.classifier is not None and self.appearance is not None:
            negatives = [self.appearance.describe(b)
                         for b in sample_negatives(chosen, self.rng, self.config, self.bounds)]
            self.classifier.update(self.appearance.describe(chosen), negatives, epochs=self.config.update_epochs)
        logger.debug(f"Completed frame {target}: box ({chosen.cx:.1f}, {chosen.cy:.1f}, {chosen.w:.1f}, {chosen.h:.1f})")
        return entry


def complete_track(track: Track, config: Optional[CompletionConfig] = None,
                   classifier: Optional[OnlineClassifier] = None,
                   shifts: Optional[Dict[int, Shift]] = None,
                   appearance: Optional[AppearanceSource] = None,
                   span: Optional[Tuple[int, int]] = None,
                   rng: Optional[np.random.Generator] = None) -> Track:
    """
    Fill the temporal gaps of a track.

    Every gap of at most max_gap frames is filled forward from the box
    before it. Each filled box is the best-scoring search window, or the
    shifted previous box when the classifier cannot tell the windows apart
    (or there is no classifier or appearance source). Longer gaps are left
    open and reported. With ``span``, the track is also extended backward
    to span[0] and forward to span[1], at most max_gap frames each way.

    Args:
        track: Track with at least one detected box
        config: Completion parameters
        classifier: Frame-level detector, updated with every filled box
        shifts: Per-frame box motion (dx, dy) from frame t to t+1; by default
            the motion stored on the detection of the known box
        appearance: Describes candidate windows
        span: Optional (first, last) frame range to extend the track to
        rng: Random generator for the update negatives

    Returns:
        New Track; detected boxes are never changed
    """
    config = config or CompletionConfig()
    if not any(e.source is BoxSource.DETECTED for e in track.entries):
        raise InputError("completion needs a track with at least one detected box")
    rng = rng or np.random.default_rng(0)
    completer = _Completer({e.frame: e for e in track.entries}, config, classifier, appearance, shifts, rng)
    open_gaps: List[Tuple[int, int]] = []

    for first, last in track.gaps():
        if last - first + 1 > config.max_gap:
            logger.warning(f"Track {track.track_id} of {track.video!r}: gap {first}-{last} "
                           f"exceeds {config.max_gap} frames, left open")
            open_gaps.append((first, last))
            continue
        prev = completer.entries[first - 1]
        for frame in range(first, last + 1):
            prev = completer.step(prev, frame)

    if span is not None:
        lo, hi = span
        lo = max(0, lo, track.start_frame - config.max_gap)
        hi = min(hi, track.end_frame + config.max_gap)
        prev = completer.entries[track.start_frame]
        for frame in range(track.start_frame - 1, lo - 1, -1):
            prev = completer.step(prev, frame)
        prev = completer.entries[track.end_frame]
        for frame in range(track.end_frame + 1, hi + 1):
            prev = completer.step(prev, frame)

    if completer.completed:
        logger.debug(f"Track {track.track_id} of {track.video!r}: {completer.completed} frames completed")
    entries = [completer.entries[f] for f in sorted(completer.entries)]
    return Track(entries, video=track.video, track_id=track.track_id, open_gaps=open_gaps)
