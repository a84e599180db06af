"""
JSON-lines file formats.

One JSON object per line. Readers report problems as
``<path>:<line>: <reason>``; writers create missing parent directories
and emit keys in a fixed order so equal inputs give equal bytes.
"""

import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .association import PathSet
from .completion import BoxSource, Track, TrackEntry
from .errors import InputError
from .evaluation import GroundTruthTrack
from .geometry import BoundingBox, Detection, FeatureHistogram
from .proposals import ActionProposal
from .search import ActionPath

logger = logging.getLogger(__name__)

Frames = List[List[Detection]]
DetectionsByVideo = Dict[str, Frames]

# Largest frame index accepted from a file; videos are materialized frame by frame.
MAX_FRAME_INDEX = 1_000_000


def iter_jsonl(path: str) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Yield (line number, record) for every non-blank line.

    Raises:
        InputError: if the file is missing or a line is not a JSON object
    """
    try:
        f = open(path, "r", encoding="utf-8")
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    with f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: malformed JSON: {e.msg}") from e
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> int:
    """
    Write records one per line.

    Returns:
        Number of records written

    Raises:
        InputError: if the path cannot be written
    """
    count = 0
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, separators=(",", ":")))
                f.write("\n")
                count += 1
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from e
    return count


def _field(record: Dict[str, Any], name: str, where: str) -> Any:
    if name not in record:
        raise InputError(f"{where}: missing field '{name}'")
    return record[name]


def _number(record: Dict[str, Any], name: str, where: str) -> float:
    value = _field(record, name, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InputError(f"{where}: field '{name}' must be a finite number, got {value!r}")
    return float(value)


def _optional_number(record: Dict[str, Any], name: str, where: str, default: float = 0.0) -> float:
    if record.get(name) is None:
        return default
    return _number(record, name, where)


def _integer(record: Dict[str, Any], name: str, where: str) -> int:
    value = _field(record, name, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{where}: field '{name}' must be an integer, got {value!r}")
    return value


def _frame_index(record: Dict[str, Any], name: str, where: str) -> int:
    value = _integer(record, name, where)
    if not 0 <= value <= MAX_FRAME_INDEX:
        raise InputError(f"{where}: field '{name}' must be in [0, {MAX_FRAME_INDEX}], got {value}")
    return value


def _histogram(record: Dict[str, Any], name: str, where: str) -> FeatureHistogram:
    values = _field(record, name, where)
    if not isinstance(values, list):
        raise InputError(f"{where}: field '{name}' must be a list of numbers")
    try:
        return FeatureHistogram(values)
    except (InputError, TypeError, ValueError) as e:
        raise InputError(f"{where}: field '{name}': {e}") from e


def _box(record: Dict[str, Any], frame: int, where: str) -> BoundingBox:
    try:
        return BoundingBox(frame, _number(record, "cx", where), _number(record, "cy", where),
                           _number(record, "w", where), _number(record, "h", where))
    except InputError as e:
        if str(e).startswith(where):
            raise
        raise InputError(f"{where}: {e}") from e


def record_to_detection(record: Dict[str, Any], where: str = "record") -> Detection:
    """Parse one detection record (histograms are L1-renormalized)."""
    frame = _frame_index(record, "frame", where)
    box = _box(record, frame, where)
    try:
        detection = Detection(
            box=box,
            human_score=_number(record, "human_score", where),
            motion_hist=_histogram(record, "motion_hist", where),
            color_hist=_histogram(record, "color_hist", where),
            grad_hist=_histogram(record, "grad_hist", where),
            video=str(_field(record, "video", where)),
            shift=(_optional_number(record, "shift_dx", where), _optional_number(record, "shift_dy", where)),
        )
    except InputError as e:
        if str(e).startswith(where):
            raise
        raise InputError(f"{where}: {e}") from e
    if record.get("actionness") is not None:
        actionness = _number(record, "actionness", where)
        if actionness < 0:
            raise InputError(f"{where}: field 'actionness' must be >= 0, got {actionness}")
        detection.actionness = actionness
    return detection


def detection_to_record(detection: Detection, include_actionness: bool = True) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "video": detection.video,
        "frame": detection.frame,
        "cx": detection.box.cx,
        "cy": detection.box.cy,
        "w": detection.box.w,
        "h": detection.box.h,
        "human_score": detection.human_score,
        "motion_hist": detection.motion_hist.values.tolist(),
        "color_hist": detection.color_hist.values.tolist(),
        "grad_hist": detection.grad_hist.values.tolist(),
    }
    if detection.shift != (0.0, 0.0):
        record["shift_dx"] = float(detection.shift[0])
        record["shift_dy"] = float(detection.shift[1])
    if include_actionness and detection.actionness is not None:
        record["actionness"] = detection.actionness
    return record


def read_detections(path: str) -> DetectionsByVideo:
    """
    Read detections grouped by video and frame.

    Every video gets frames 0..T-1 with T one past its largest frame index;
    frames without detections are empty lists. A detection's index is its
    position among the same-frame records of the file.

    Raises:
        InputError: naming the offending line
    """
    grouped: Dict[str, Dict[int, List[Detection]]] = {}
    for lineno, record in iter_jsonl(path):
        detection = record_to_detection(record, f"{path}:{lineno}")
        frames = grouped.setdefault(detection.video, {})
        same_frame = frames.setdefault(detection.frame, [])
        detection.index = len(same_frame)
        same_frame.append(detection)
    result: DetectionsByVideo = {}
    for video in sorted(grouped):
        frames = grouped[video]
        result[video] = [frames.get(t, []) for t in range(max(frames) + 1)]
    logger.info(f"Read {sum(len(f) for fr in result.values() for f in fr)} detections "
                f"in {len(result)} videos from {path}")
    return result


def write_detections(detections: Mapping[str, Frames], path: str, include_actionness: bool = True) -> int:
    return write_jsonl(path, (
        detection_to_record(d, include_actionness)
        for video in sorted(detections)
        for frame in detections[video]
        for d in sorted(frame, key=lambda d: d.index)
    ))


def read_ground_truth(path: str) -> Dict[str, List[GroundTruthTrack]]:
    """Read ground-truth tubes: {video, track_id, label, start_frame, boxes: [[cx,cy,w,h] | null, ...]}."""
    result: Dict[str, List[GroundTruthTrack]] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        start = _frame_index(record, "start_frame", where)
        raw_boxes = _field(record, "boxes", where)
        if not isinstance(raw_boxes, list):
            raise InputError(f"{where}: field 'boxes' must be a list")
        boxes: List[Optional[BoundingBox]] = []
        try:
            for offset, raw in enumerate(raw_boxes):
                if raw is None:
                    boxes.append(None)
                elif isinstance(raw, list) and len(raw) == 4:
                    boxes.append(BoundingBox(start + offset, *(float(v) for v in raw)))
                else:
                    raise InputError(f"box {offset} must be [cx, cy, w, h] or null")
            track = GroundTruthTrack(
                video=str(_field(record, "video", where)),
                track_id=_integer(record, "track_id", where),
                label=str(record.get("label", "action")),
                start_frame=start,
                boxes=boxes,
            )
        except (InputError, TypeError, ValueError) as e:
            if str(e).startswith(where):
                raise
            raise InputError(f"{where}: {e}") from e
        result.setdefault(track.video, []).append(track)
    return result


def write_ground_truth(tracks: Iterable[GroundTruthTrack], path: str) -> int:
    return write_jsonl(path, (
        {
            "video": g.video,
            "track_id": g.track_id,
            "label": g.label,
            "start_frame": g.start_frame,
            "boxes": [None if b is None else [b.cx, b.cy, b.w, b.h] for b in g.boxes],
        }
        for g in tracks
    ))


def _lookup(detections: Mapping[str, Frames], video: str, frame: int, index: int, where: str) -> Detection:
    frames = detections.get(video)
    if frames is None:
        raise InputError(f"{where}: unknown video {video!r}")
    if not 0 <= frame < len(frames) or not 0 <= index < len(frames[frame]):
        raise InputError(f"{where}: no detection {index} on frame {frame} of {video!r}")
    return frames[frame][index]


def write_paths(paths: Mapping[str, Sequence[ActionPath]], path: str) -> int:
    """Write candidate paths: {video, path_id, score, boxes: [{frame, index}]}."""
    return write_jsonl(path, (
        {
            "video": video,
            "path_id": i,
            "score": p.score,
            "boxes": [{"frame": d.frame, "index": d.index} for d in p.detections],
        }
        for video in sorted(paths)
        for i, p in enumerate(paths[video])
    ))


def read_paths(path: str, detections: Mapping[str, Frames]) -> Dict[str, List[ActionPath]]:
    """Read candidate paths, resolving their boxes against the detections they came from."""
    result: Dict[str, List[ActionPath]] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        video = str(_field(record, "video", where))
        refs = _field(record, "boxes", where)
        if not isinstance(refs, list) or not all(isinstance(r, dict) for r in refs):
            raise InputError(f"{where}: field 'boxes' must be a list of {{frame, index}} objects")
        try:
            members = [_lookup(detections, video, _integer(r, "frame", where), _integer(r, "index", where), where)
                       for r in refs]
            candidate = ActionPath.from_detections(members)
        except InputError as e:
            if str(e).startswith(where):
                raise
            raise InputError(f"{where}: {e}") from e
        paths = result.setdefault(video, [])
        if _integer(record, "path_id", where) != len(paths):
            raise InputError(f"{where}: path ids must count up from 0 within a video")
        paths.append(candidate)
    return result


def write_path_sets(path_sets: Mapping[str, Sequence[PathSet]], path: str) -> int:
    """Write path sets: {video, set_id, path_ids, objective}."""
    return write_jsonl(path, (
        {"video": video, "set_id": i, "path_ids": list(s.candidate_indices), "objective": s.objective}
        for video in sorted(path_sets)
        for i, s in enumerate(path_sets[video])
    ))


def read_path_sets(path: str, paths: Mapping[str, Sequence[ActionPath]],
                   max_paths: int = 12, eta_p: float = 0.3) -> Dict[str, List[PathSet]]:
    """Read path sets, resolving path ids against the candidate paths."""
    result: Dict[str, List[PathSet]] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        video = str(_field(record, "video", where))
        candidates = paths.get(video, [])
        ids = _field(record, "path_ids", where)
        if not isinstance(ids, list) or any(not isinstance(i, int) or not 0 <= i < len(candidates) for i in ids):
            raise InputError(f"{where}: path_ids must reference candidate paths of {video!r}")
        result.setdefault(video, []).append(PathSet(
            paths=[candidates[i] for i in ids],
            max_paths=max_paths,
            eta_p=eta_p,
            candidate_indices=list(ids),
            objective_trace=[_number(record, "objective", where)],
        ))
    return result


def _entry_record(entry: TrackEntry) -> Dict[str, Any]:
    return {
        "frame": entry.frame,
        "cx": entry.box.cx,
        "cy": entry.box.cy,
        "w": entry.box.w,
        "h": entry.box.h,
        "source": entry.source.value,
        "actionness": entry.actionness,
    }


def _entries(raw: Any, where: str) -> List[TrackEntry]:
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{where}: field 'boxes' must be a non-empty list")
    entries = []
    for item in raw:
        if not isinstance(item, dict):
            raise InputError(f"{where}: every box must be an object, got {item!r}")
        frame = _frame_index(item, "frame", where)
        try:
            source = BoxSource(item.get("source", BoxSource.DETECTED.value))
        except ValueError as e:
            raise InputError(f"{where}: unknown box source {item.get('source')!r}") from e
        entries.append(TrackEntry(frame, _box(item, frame, where), source,
                                  _optional_number(item, "actionness", where)))
    return entries


def write_tracks(tracks: Iterable[Track], path: str) -> int:
    """Write tracks: {video, track_id, boxes: [{frame, cx, cy, w, h, source, actionness}], score, open_gaps}."""
    return write_jsonl(path, (
        {
            "video": t.video,
            "track_id": t.track_id,
            "boxes": [_entry_record(e) for e in t.entries],
            "score": t.score,
            "open_gaps": [list(g) for g in t.open_gaps],
        }
        for t in tracks
    ))


def _open_gaps(record: Dict[str, Any], where: str) -> List[Tuple[int, int]]:
    raw = record.get("open_gaps", [])
    if not isinstance(raw, list) or not all(
            isinstance(g, list) and len(g) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in g)
            for g in raw):
        raise InputError(f"{where}: field 'open_gaps' must be a list of [first, last] frame pairs")
    return [(g[0], g[1]) for g in raw]


def read_tracks(path: str) -> Dict[str, List[Track]]:
    result: Dict[str, List[Track]] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        try:
            track = Track(
                _entries(_field(record, "boxes", where), where),
                video=str(_field(record, "video", where)),
                track_id=_integer(record, "track_id", where),
                open_gaps=_open_gaps(record, where),
            )
        except InputError as e:
            if str(e).startswith(where):
                raise
            raise InputError(f"{where}: {e}") from e
        result.setdefault(track.video, []).append(track)
    return result


def write_proposals(proposals: Iterable[ActionProposal], path: str) -> int:
    """
    Write proposals: {video, proposal_id, start_frame, end_frame,
    boxes: [{frame, cx, cy, w, h, source, actionness}], score}.
    """
    return write_jsonl(path, (
        {
            "video": p.video,
            "proposal_id": p.proposal_id,
            "start_frame": p.start_frame,
            "end_frame": p.end_frame,
            "boxes": [_entry_record(e) for e in p.track.entries],
            "score": p.score,
        }
        for p in proposals
    ))


def read_proposals(path: str) -> Dict[str, List[ActionProposal]]:
    result: Dict[str, List[ActionProposal]] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        video = str(_field(record, "video", where))
        proposal_id = _integer(record, "proposal_id", where)
        try:
            track = Track(_entries(_field(record, "boxes", where), where), video=video, track_id=proposal_id)
            proposal = ActionProposal(track, video=video, proposal_id=proposal_id,
                                      score=_number(record, "score", where))
        except InputError as e:
            if str(e).startswith(where):
                raise
            raise InputError(f"{where}: {e}") from e
        if (proposal.start_frame, proposal.end_frame) != (_integer(record, "start_frame", where),
                                                          _integer(record, "end_frame", where)):
            raise InputError(f"{where}: start_frame/end_frame disagree with the boxes")
        result.setdefault(video, []).append(proposal)
    return result


class MotionSamples(NamedTuple):
    """Labeled motion histograms with the action class of each positive, when given."""
    positives: List[FeatureHistogram]
    negatives: List[FeatureHistogram]
    actions: List[str]

    @property
    def n_classes(self) -> int:
        return max(1, len(set(self.actions)))


def read_motion_samples(path: str) -> MotionSamples:
    """Read labeled motion histograms: {label: "positive" | "negative", hist: [...], action?: str}."""
    samples = MotionSamples([], [], [])
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        label = _field(record, "label", where)
        hist = _histogram(record, "hist", where)
        if label == "positive":
            samples.positives.append(hist)
            if record.get("action") is not None:
                samples.actions.append(str(record["action"]))
        elif label == "negative":
            samples.negatives.append(hist)
        else:
            raise InputError(f"{where}: label must be 'positive' or 'negative', got {label!r}")
    return samples


def write_motion_samples(positives: Iterable[FeatureHistogram], negatives: Iterable[FeatureHistogram],
                         path: str, actions: Optional[Sequence[str]] = None) -> int:
    positives = list(positives)
    actions = list(actions) if actions is not None else [None] * len(positives)
    if len(actions) != len(positives):
        raise InputError(f"{len(actions)} action labels for {len(positives)} positive samples")
    return write_jsonl(path, [
        *({"label": "positive", "hist": h.values.tolist(), **({"action": a} if a is not None else {})}
          for h, a in zip(positives, actions)),
        *({"label": "negative", "hist": h.values.tolist()} for h in negatives),
    ])
