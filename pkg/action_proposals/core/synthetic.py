"""
Synthetic scenarios.

Generates ground-truth actor tubes and noisy per-frame detections from a
seeded scenario description. Actors move along linear or sinusoidal
trajectories and their detections jitter and drop out. Clutter boxes with
low human scores and random appearance fill every frame.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError
from .evaluation import GroundTruthTrack
from .geometry import BoundingBox, Detection, FeatureHistogram, iou

logger = logging.getLogger(__name__)

COLOR_BINS = 16
GRAD_BINS = 16
MOTION_BINS = 8
MOTION_CONCENTRATION = 50.0


def peaked_histogram(bins: int, first: int, width: int) -> List[float]:
    """Histogram with equal mass on ``width`` bins starting at ``first`` (cyclic)."""
    values = [0.0] * bins
    for k in range(width):
        values[(first + k) % bins] = 1.0 / width
    return values


def uniform_histogram(bins: int) -> List[float]:
    return [1.0 / bins] * bins


class MotionModel(Enum):
    """Actor trajectory family."""
    LINEAR = "linear"
    SINUSOIDAL = "sinusoidal"


@dataclass
class ActorSpec:
    """
    One synthetic actor.

    Attributes:
        label: Action class of the ground-truth tube
        start: Center (cx, cy) on the first frame
        size: (w, h) on the first frame
        velocity: Drift (dx, dy) per frame
        motion: LINEAR drift, or SINUSOIDAL drift plus an oscillation
        amplitude: Oscillation amplitude (ax, ay) in pixels
        period: Oscillation period in frames
        size_drift: Relative size change per frame
        first_frame, last_frame: Frames the actor is visible (last defaults to the video end)
        missing_frames: Frames where the actor is never detected
        color_proto, grad_proto, motion_proto: Appearance and motion prototypes
    """
    label: str = "action"
    start: Tuple[float, float] = (80.0, 120.0)
    size: Tuple[float, float] = (40.0, 80.0)
    velocity: Tuple[float, float] = (2.0, 0.0)
    motion: MotionModel = MotionModel.LINEAR
    amplitude: Tuple[float, float] = (0.0, 0.0)
    period: float = 50.0
    size_drift: float = 0.0
    first_frame: int = 0
    last_frame: Optional[int] = None
    missing_frames: Tuple[int, ...] = ()
    color_proto: List[float] = field(default_factory=lambda: peaked_histogram(COLOR_BINS, 0, 4))
    grad_proto: List[float] = field(default_factory=lambda: peaked_histogram(GRAD_BINS, 0, 4))
    motion_proto: List[float] = field(default_factory=lambda: peaked_histogram(MOTION_BINS, 0, 2))

    def visible(self, frame: int, n_frames: int) -> bool:
        last = n_frames - 1 if self.last_frame is None else self.last_frame
        return self.first_frame <= frame <= last

    def box_at(self, frame: int) -> BoundingBox:
        t = frame - self.first_frame
        cx = self.start[0] + self.velocity[0] * t
        cy = self.start[1] + self.velocity[1] * t
        if self.motion is MotionModel.SINUSOIDAL:
            phase = 2.0 * np.pi * t / self.period
            cx += self.amplitude[0] * float(np.sin(phase))
            cy += self.amplitude[1] * float(np.sin(phase))
        factor = (1.0 + self.size_drift) ** t
        return BoundingBox(frame, cx, cy, self.size[0] * factor, self.size[1] * factor)

    def motion_at(self, frame: int) -> Tuple[float, float]:
        """Center displacement from ``frame`` to the next frame."""
        a, b = self.box_at(frame), self.box_at(frame + 1)
        return (b.cx - a.cx, b.cy - a.cy)


@dataclass
class NoiseSpec:
    """
    Detection noise.

    Attributes:
        center_jitter: Standard deviation of the center offset, pixels
        scale_jitter: Standard deviation of the relative size change
        dropout: Probability that an actor box is not detected
        clutter_per_frame: Number of background boxes per frame
        score_noise: Standard deviation added to actor human scores
        appearance_noise: Weight of a random histogram mixed into actor appearance
    """
    center_jitter: float = 0.0
    scale_jitter: float = 0.0
    dropout: float = 0.0
    clutter_per_frame: int = 0
    score_noise: float = 0.0
    appearance_noise: float = 0.0


@dataclass
class ScenarioSpec:
    """
    Complete description of a synthetic video.

    Attributes:
        seed: Seed of every random choice
        n_frames: Number of frames (>= 1)
        actors: Actor descriptions
        noise: Detection noise
        frame_size: (width, height) in pixels
        video: Video identifier
        actor_score: Mean human score of actor detections
        clutter_score: (low, high) range of clutter human scores
        background_color, background_grad: Appearance of empty regions
    """
    seed: int = 0
    n_frames: int = 100
    actors: List[ActorSpec] = field(default_factory=list)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    frame_size: Tuple[float, float] = (320.0, 240.0)
    video: str = "synthetic"
    actor_score: float = 0.9
    clutter_score: Tuple[float, float] = (0.0, 0.3)
    background_color: List[float] = field(default_factory=lambda: uniform_histogram(COLOR_BINS))
    background_grad: List[float] = field(default_factory=lambda: uniform_histogram(GRAD_BINS))

    def validate(self) -> "ScenarioSpec":
        problems = []
        if self.n_frames < 1:
            problems.append(f"n_frames must be >= 1, got {self.n_frames}")
        for name in ("dropout", "appearance_noise"):
            value = getattr(self.noise, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"noise.{name} must be in [0, 1], got {value}")
        for name in ("center_jitter", "scale_jitter", "score_noise", "clutter_per_frame"):
            if getattr(self.noise, name) < 0:
                problems.append(f"noise.{name} must be >= 0")
        if not 0.0 <= self.actor_score <= 1.0:
            problems.append(f"actor_score must be in [0, 1], got {self.actor_score}")
        low, high = self.clutter_score
        if not 0.0 <= low <= high <= 1.0:
            problems.append(f"clutter_score must be an increasing range in [0, 1], got {self.clutter_score}")
        for k, actor in enumerate(self.actors):
            if len(actor.color_proto) != len(self.background_color):
                problems.append(f"actor {k}: color prototype has {len(actor.color_proto)} bins, "
                                f"background has {len(self.background_color)}")
            if len(actor.grad_proto) != len(self.background_grad):
                problems.append(f"actor {k}: gradient prototype has {len(actor.grad_proto)} bins, "
                                f"background has {len(self.background_grad)}")
            if len(actor.motion_proto) != len(self.actors[0].motion_proto):
                problems.append(f"actor {k}: motion prototypes must share one dimension")
        if problems:
            raise InputError("invalid scenario: " + "; ".join(problems))
        return self

    @property
    def motion_bins(self) -> int:
        return len(self.actors[0].motion_proto) if self.actors else MOTION_BINS

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for actor in data["actors"]:
            actor["motion"] = actor["motion"].value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioSpec":
        try:
            data = dict(data)
            _reject_unknown(cls, data, "scenario")
            actors = []
            for k, raw in enumerate(data.pop("actors", [])):
                raw = dict(raw)
                _reject_unknown(ActorSpec, raw, f"actors[{k}]")
                if "motion" in raw:
                    raw["motion"] = MotionModel(raw["motion"])
                for key in ("start", "size", "velocity", "amplitude", "missing_frames"):
                    if key in raw:
                        raw[key] = tuple(raw[key])
                actors.append(ActorSpec(**raw))
            noise_raw = dict(data.pop("noise", {}))
            _reject_unknown(NoiseSpec, noise_raw, "noise")
            for key in ("frame_size", "clutter_score"):
                if key in data:
                    data[key] = tuple(data[key])
            return cls(actors=actors, noise=NoiseSpec(**noise_raw), **data).validate()
        except (TypeError, ValueError) as e:
            if isinstance(e, InputError):
                raise
            raise InputError(f"malformed scenario: {e}") from e

    @classmethod
    def load(cls, path: str) -> "ScenarioSpec":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError as e:
            raise InputError(f"scenario file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: not a JSON document: {e}") from e

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def _reject_unknown(cls: type, data: Dict[str, Any], where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"unknown {where} keys: {', '.join(unknown)}")


class SyntheticAppearance:
    """
    Appearance of arbitrary windows in a synthetic video.

    A window's histograms mix every visible actor's prototype in
    proportion to its IoU with the actor box, and the background
    histogram with the remaining weight; each part is L1-normalized.
    """

    def __init__(self, spec: ScenarioSpec):
        self._spec = spec
        self._background = (np.asarray(spec.background_color, dtype=float),
                            np.asarray(spec.background_grad, dtype=float))
        self._protos = [
            (np.asarray(FeatureHistogram(a.color_proto).values), np.asarray(FeatureHistogram(a.grad_proto).values))
            for a in spec.actors
        ]
        self.frame_size = spec.frame_size

    def parts(self, box: BoundingBox) -> Tuple[np.ndarray, np.ndarray]:
        weights = [
            iou(box, actor.box_at(box.frame)) if actor.visible(box.frame, self._spec.n_frames) else 0.0
            for actor in self._spec.actors
        ]
        rest = max(0.0, 1.0 - sum(weights))
        color = rest * self._background[0]
        grad = rest * self._background[1]
        for weight, (proto_color, proto_grad) in zip(weights, self._protos):
            if weight > 0:
                color = color + weight * proto_color
                grad = grad + weight * proto_grad
        return color / color.sum(), grad / grad.sum()

    def describe(self, box: BoundingBox) -> np.ndarray:
        color, grad = self.parts(box)
        return np.concatenate([color, grad])


@dataclass
class Scenario:
    """Generated ground truth, detections and the appearance model."""
    spec: ScenarioSpec
    ground_truth: List[GroundTruthTrack]
    frames: List[List[Detection]]
    appearance: SyntheticAppearance

    @property
    def video(self) -> str:
        return self.spec.video

    @property
    def detection_count(self) -> int:
        return sum(len(frame) for frame in self.frames)


def _mix_noise(values: np.ndarray, weight: float, rng: np.random.Generator) -> np.ndarray:
    if weight <= 0:
        return values
    return (1.0 - weight) * values + weight * rng.dirichlet(np.ones(values.size))


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """
    Generate one synthetic video.

    Actor detections carry human scores around ``actor_score``, the
    appearance of their (jittered) box and a motion histogram drawn close
    to the actor's motion prototype; their shift is the true motion to
    the next frame. Clutter boxes carry low scores and random histograms.
    Output is fully determined by the scenario description, including its seed.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    appearance = SyntheticAppearance(spec)
    width, height = spec.frame_size
    noise = spec.noise

    ground_truth = []
    for k, actor in enumerate(spec.actors):
        boxes = [actor.box_at(f) if actor.visible(f, spec.n_frames) else None for f in range(spec.n_frames)]
        visible = [i for i, b in enumerate(boxes) if b is not None]
        if not visible:
            raise InputError(f"actor {k} is never visible")
        first, last = visible[0], visible[-1]
        ground_truth.append(GroundTruthTrack(spec.video, k, actor.label, first, boxes[first:last + 1]))

    frames: List[List[Detection]] = []
    dropped = 0
    for frame in range(spec.n_frames):
        detections: List[Detection] = []
        for actor in spec.actors:
            if not actor.visible(frame, spec.n_frames):
                continue
            dropout_draw = rng.random()
            jitter = rng.normal(0.0, 1.0, size=2) * noise.center_jitter
            scale = 1.0 + rng.normal(0.0, 1.0, size=2) * noise.scale_jitter
            score_draw = rng.normal(0.0, 1.0) * noise.score_noise
            motion = rng.dirichlet(MOTION_CONCENTRATION * np.asarray(actor.motion_proto, dtype=float) + 1e-2)
            if frame in actor.missing_frames or dropout_draw < noise.dropout:
                dropped += 1
                continue
            truth = actor.box_at(frame)
            if noise.center_jitter == 0 and noise.scale_jitter == 0:
                box = truth
            else:
                box = BoundingBox(frame, truth.cx + jitter[0], truth.cy + jitter[1],
                                  truth.w * max(scale[0], 0.1), truth.h * max(scale[1], 0.1))
            color, grad = appearance.parts(box)
            last_visible = not actor.visible(frame + 1, spec.n_frames)
            shift = actor.motion_at(frame - 1 if last_visible and frame > 0 else frame)
            detections.append(Detection(
                box=box,
                human_score=float(np.clip(spec.actor_score + score_draw, 0.0, 1.0)),
                motion_hist=FeatureHistogram(motion),
                color_hist=FeatureHistogram(_mix_noise(color, noise.appearance_noise, rng)),
                grad_hist=FeatureHistogram(_mix_noise(grad, noise.appearance_noise, rng)),
                video=spec.video,
                shift=shift,
            ))
        for _ in range(noise.clutter_per_frame):
            w = rng.uniform(20.0, 60.0)
            h = rng.uniform(40.0, 100.0)
            cx = rng.uniform(w / 2.0, width - w / 2.0)
            cy = rng.uniform(h / 2.0, height - h / 2.0)
            detections.append(Detection(
                box=BoundingBox(frame, cx, cy, w, h),
                human_score=float(rng.uniform(*spec.clutter_score)),
                motion_hist=FeatureHistogram(rng.dirichlet(np.ones(spec.motion_bins))),
                color_hist=FeatureHistogram(rng.dirichlet(np.ones(len(spec.background_color)))),
                grad_hist=FeatureHistogram(rng.dirichlet(np.ones(len(spec.background_grad)))),
                video=spec.video,
            ))
        for index, detection in enumerate(detections):
            detection.index = index
        frames.append(detections)

    logger.info(f"Generated scenario {spec.video!r}: {spec.n_frames} frames, {len(spec.actors)} actors, "
                f"{sum(len(f) for f in frames)} detections, {dropped} actor boxes dropped")
    return Scenario(spec, ground_truth, frames, appearance)


def two_actor_crossing(seed: int = 0, n_frames: int = 100, video: str = "crossing") -> ScenarioSpec:
    """
    Two actors walking towards each other on separate lanes.

    Frames are 320x240, boxes 40x80; actor A walks right on y=100, actor B
    walks left on y=150, 2 px per frame. Center jitter 2 px, dropout 0.1,
    3 clutter boxes per frame.
    """
    return ScenarioSpec(
        seed=seed,
        n_frames=n_frames,
        video=video,
        actors=[
            ActorSpec(
                label="walk-right", start=(60.0, 100.0), size=(40.0, 80.0), velocity=(2.0, 0.0),
                color_proto=peaked_histogram(COLOR_BINS, 0, 4),
                grad_proto=peaked_histogram(GRAD_BINS, 0, 4),
                motion_proto=peaked_histogram(MOTION_BINS, 0, 2),
            ),
            ActorSpec(
                label="walk-left", start=(260.0, 150.0), size=(40.0, 80.0), velocity=(-2.0, 0.0),
                color_proto=peaked_histogram(COLOR_BINS, 8, 4),
                grad_proto=peaked_histogram(GRAD_BINS, 8, 4),
                motion_proto=peaked_histogram(MOTION_BINS, 4, 2),
            ),
        ],
        noise=NoiseSpec(center_jitter=2.0, dropout=0.1, clutter_per_frame=3, score_noise=0.05),
    )


def single_actor(seed: int = 0, gap: Optional[int] = None, n_frames: int = 60,
                 video: str = "single") -> ScenarioSpec:
    """
    One noiseless actor walking right, optionally with a forced detection gap.

    Args:
        seed: Scenario seed
        gap: Number of consecutive undetected frames centered in the video
        n_frames: Video length
        video: Video identifier
    """
    missing: Tuple[int, ...] = ()
    if gap:
        first = n_frames // 2 - gap // 2
        missing = tuple(range(first, first + gap))
    return ScenarioSpec(
        seed=seed,
        n_frames=n_frames,
        video=video,
        actors=[ActorSpec(label="walk", start=(80.0, 120.0), size=(40.0, 80.0), velocity=(2.0, 0.0),
                          missing_frames=missing)],
    )


SCENARIO_PRESETS = {
    "two-actor-crossing": two_actor_crossing,
    "single-actor": single_actor,
}


def preset_names() -> Sequence[str]:
    return list(SCENARIO_PRESETS)
