"""
Track-level evaluation of action proposals.

Track IoU is the mean per-frame IoU over the frames where either the
proposal or the ground truth has a box. Recall counts ground truths
matched (one-to-one, best first) by a proposal at or above a threshold;
ABO averages each ground truth's best overlap and MABO averages ABO over
classes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

import pandas as pd

from .config import EvaluationConfig
from .errors import InputError
from .geometry import BoundingBox, iou

logger = logging.getLogger(__name__)

ALL_CLASSES = "__all__"


class Tube(Protocol):
    """Anything with per-frame boxes: proposals, tracks, ground truths."""

    @property
    def frames(self) -> Iterable[int]:
        ...

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        ...


@dataclass
class GroundTruthTrack:
    """
    Annotated actor tube.

    Attributes:
        video: Video identifier
        track_id: Index within the video
        label: Action class
        start_frame: Frame of boxes[0]
        boxes: One box per frame from start_frame on; None where unannotated
    """
    video: str
    track_id: int
    label: str
    start_frame: int
    boxes: List[Optional[BoundingBox]] = field(default_factory=list)

    def __post_init__(self):
        if not any(b is not None for b in self.boxes):
            raise InputError(f"ground truth {self.track_id} of {self.video!r} has no annotated frame")
        for offset, box in enumerate(self.boxes):
            if box is not None and box.frame != self.start_frame + offset:
                raise InputError(
                    f"ground truth {self.track_id} of {self.video!r}: box for frame {box.frame} "
                    f"stored at frame {self.start_frame + offset}"
                )

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self.boxes) - 1

    @property
    def frames(self) -> List[int]:
        return [self.start_frame + i for i, b in enumerate(self.boxes) if b is not None]

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        offset = frame - self.start_frame
        if 0 <= offset < len(self.boxes):
            return self.boxes[offset]
        return None

    def as_mapping(self) -> Dict[int, BoundingBox]:
        return {f: self.box_at(f) for f in self.frames}


def track_iou(g: Tube, t: Tube) -> float:
    """
    Mean per-frame IoU over the frames where either tube has a box.

    Frames where only one side has a box count with IoU 0.

    Raises:
        InputError: "no comparable frames" when neither side has a box
    """
    frames = set(g.frames) | set(t.frames)
    if not frames:
        raise InputError("no comparable frames")
    total = 0.0
    for frame in sorted(frames):
        a, b = g.box_at(frame), t.box_at(frame)
        if a is not None and b is not None:
            total += iou(a, b)
    return total / len(frames)


def _group(items: Iterable[Any]) -> Dict[str, List[Any]]:
    out: Dict[str, List[Any]] = {}
    for item in items:
        out.setdefault(item.video, []).append(item)
    return out


def _as_per_video(items: Any) -> Dict[str, List[Any]]:
    if isinstance(items, Mapping):
        return {video: list(values) for video, values in items.items()}
    return _group(items)


def _iou_table(proposals: Sequence[Tube], gts: Sequence[GroundTruthTrack]) -> List[List[float]]:
    return [[track_iou(g, p) for p in proposals] for g in gts]


def _greedy_matches(table: List[List[float]], eta: float) -> Dict[int, Tuple[int, float]]:
    """One-to-one best-first matching of ground truths (rows) to proposals (columns)."""
    pairs = sorted(
        ((value, gi, pi) for gi, row in enumerate(table) for pi, value in enumerate(row) if value >= eta),
        key=lambda item: (-item[0], item[1], item[2]),
    )
    matched: Dict[int, Tuple[int, float]] = {}
    used = set()
    for value, gi, pi in pairs:
        if gi in matched or pi in used:
            continue
        matched[gi] = (pi, value)
        used.add(pi)
    return matched


@dataclass
class _VideoScores:
    gts: List[GroundTruthTrack]
    table: List[List[float]]

    def best(self, gi: int) -> float:
        return max(self.table[gi], default=0.0)


def _score_videos(proposals: Any, gts: Any) -> List[_VideoScores]:
    gt_map = _as_per_video(gts)
    if not any(gt_map.values()):
        raise InputError("evaluation needs at least one ground-truth track")
    prop_map = _as_per_video(proposals)
    return [_VideoScores(list(gt_map[video]), _iou_table(prop_map.get(video, []), gt_map[video]))
            for video in sorted(gt_map)]


def recall_at(proposals: Any, gts: Any, eta: float = 0.5) -> float:
    """
    Fraction of ground truths matched by a proposal with track IoU >= eta.

    Args:
        proposals: {video: [proposal, ...]} or a flat list of proposals
        gts: {video: [GroundTruthTrack, ...]} or a flat list
        eta: IoU threshold

    Raises:
        InputError: if there is no ground truth
    """
    scored = _score_videos(proposals, gts)
    return _recall(scored, eta)


def _recall(scored: List[_VideoScores], eta: float) -> float:
    total = sum(len(v.gts) for v in scored)
    matched = sum(len(_greedy_matches(v.table, eta)) for v in scored)
    return matched / total


def recall_curve(proposals: Any, gts: Any, thresholds: Sequence[float]) -> pd.DataFrame:
    """Recall at every threshold, as a frame with columns eta and recall."""
    scored = _score_videos(proposals, gts)
    return pd.DataFrame({"eta": list(thresholds), "recall": [_recall(scored, eta) for eta in thresholds]})


def _per_class(scored: List[_VideoScores], eta: float) -> pd.DataFrame:
    rows = []
    for video in scored:
        matches = _greedy_matches(video.table, eta)
        for gi, gt in enumerate(video.gts):
            rows.append({"label": gt.label, "best_iou": video.best(gi), "matched": gi in matches})
    frame = pd.DataFrame(rows)
    table = frame.groupby("label", sort=True).agg(
        n_gt=("best_iou", "size"), abo=("best_iou", "mean"), recall=("matched", "mean")
    ).reset_index()
    table["n_gt"] = table["n_gt"].astype(int)
    return table


def abo_mabo(proposals: Any, gts: Any, eta: float = 0.5) -> Tuple[float, float, pd.DataFrame]:
    """
    Average best overlap over ground truths, and its mean over classes.

    Returns:
        (ABO, MABO, per-class table with columns label, n_gt, abo, recall)
    """
    scored = _score_videos(proposals, gts)
    best = [v.best(gi) for v in scored for gi in range(len(v.gts))]
    abo = math.fsum(best) / len(best)
    table = _per_class(scored, eta)
    mabo = math.fsum(table["abo"].tolist()) / len(table)
    return abo, mabo, table


@dataclass
class EvaluationReport:
    """All metrics of one evaluation run."""
    eta: float
    recall: float
    abo: float
    mabo: float
    n_videos: int
    n_ground_truth: int
    n_proposals: int
    per_class: pd.DataFrame
    curve: pd.DataFrame

    @property
    def proposals_per_video(self) -> float:
        return self.n_proposals / self.n_videos if self.n_videos else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta,
            "recall": self.recall,
            "abo": self.abo,
            "mabo": self.mabo,
            "n_videos": self.n_videos,
            "n_ground_truth": self.n_ground_truth,
            "n_proposals": self.n_proposals,
            "proposals_per_video": self.proposals_per_video,
            "per_class": [
                {"label": str(row.label), "n_gt": int(row.n_gt), "abo": float(row.abo), "recall": float(row.recall)}
                for row in self.per_class.itertuples(index=False)
            ],
            "recall_curve": [
                {"eta": float(row.eta), "recall": float(row.recall)}
                for row in self.curve.itertuples(index=False)
            ],
        }

    def summary(self) -> str:
        return (f"recall@{self.eta:g}={self.recall:.4f} ABO={self.abo:.4f} MABO={self.mabo:.4f} "
                f"proposals/video={self.proposals_per_video:.2f}")


def evaluate(proposals: Any, gts: Any, config: Optional[EvaluationConfig] = None) -> EvaluationReport:
    """
    Compute recall, ABO, MABO, the per-class table and the recall curve.

    Videos that have proposals but no ground truth only count towards the
    proposal statistics.
    """
    config = config or EvaluationConfig()
    prop_map = _as_per_video(proposals)
    gt_map = _as_per_video(gts)
    scored = _score_videos(prop_map, gt_map)
    abo, mabo, table = abo_mabo(prop_map, gt_map, config.eta)
    report = EvaluationReport(
        eta=config.eta,
        recall=_recall(scored, config.eta),
        abo=abo,
        mabo=mabo,
        n_videos=len(set(prop_map) | set(gt_map)),
        n_ground_truth=sum(len(v) for v in gt_map.values()),
        n_proposals=sum(len(v) for v in prop_map.values()),
        per_class=table,
        curve=pd.DataFrame({
            "eta": list(config.recall_thresholds),
            "recall": [_recall(scored, eta) for eta in config.recall_thresholds],
        }),
    )
    logger.info(f"Evaluation: {report.summary()}")
    return report


def write_report(report: EvaluationReport, directory: str) -> Dict[str, Path]:
    """
    Write metrics.json, metrics.csv and recall_curve.csv.

    metrics.csv has one row per class plus an ``__all__`` row with the
    overall values (columns label, n_gt, abo, recall).

    Returns:
        Paths of the written files by name
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": out / "metrics.json",
            "csv": out / "metrics.csv",
            "curve": out / "recall_curve.csv",
        }
        with open(paths["json"], "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        overall = pd.DataFrame([{
            "label": ALL_CLASSES, "n_gt": report.n_ground_truth, "abo": report.abo, "recall": report.recall,
        }])
        table = pd.concat([report.per_class, overall], ignore_index=True)
        table.to_csv(paths["csv"], index=False, float_format="%.6f")
        report.curve.to_csv(paths["curve"], index=False, float_format="%.6f")
    except OSError as e:
        raise InputError(f"cannot write metrics to {directory}: {e}") from e
    return paths
