"""
End-to-end proposal pipeline.

score -> search -> associate -> complete -> emit, per video. Videos are
independent and may run on a thread pool; results always come back in
video order.
"""

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.system import format_seconds, get_worker_count, timed
from .actionness import ActionnessScorer, GmmModel, fit_motion_models, select_motion_samples
from .association import PathSet, extract_all_path_sets
from .completion import (AppearanceSource, DetectionAppearance, Track, build_track_classifier,
                         complete_track, split_actor_tracks)
from .config import PipelineConfig
from .errors import InputError, StageError
from .evaluation import EvaluationReport, GroundTruthTrack, evaluate, write_report
from .formats import write_proposals, write_tracks
from .geometry import Detection
from .proposals import ActionProposal, emit_with_config
from .search import ActionPath, forward_backward_search

logger = logging.getLogger(__name__)

Frames = Sequence[Sequence[Detection]]
GmmPair = Tuple[GmmModel, GmmModel]

STAGES = ("score", "search", "associate", "complete", "emit")


@dataclass
class VideoResult:
    """Everything the pipeline produced for one video."""
    video: str
    candidates: List[ActionPath] = field(default_factory=list)
    path_sets: List[PathSet] = field(default_factory=list)
    tracks: List[Track] = field(default_factory=list)
    proposals: List[ActionProposal] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)


@dataclass
class PipelineResult:
    """
    Output of a pipeline run.

    Attributes:
        videos: Per-video results, sorted by video id
        gmm: Motion mixtures used for scoring, if any
        report: Metrics, when ground truth was given
    """
    videos: List[VideoResult] = field(default_factory=list)
    gmm: Optional[GmmPair] = None
    report: Optional[EvaluationReport] = None

    @property
    def proposals(self) -> List[ActionProposal]:
        return [p for v in self.videos for p in v.proposals]

    @property
    def proposals_by_video(self) -> Dict[str, List[ActionProposal]]:
        return {v.video: list(v.proposals) for v in self.videos}

    @property
    def tracks(self) -> List[Track]:
        return [t for v in self.videos for t in v.tracks]

    @property
    def timings(self) -> Dict[str, float]:
        """Seconds per stage, summed over videos."""
        total: Dict[str, float] = {}
        for video in self.videos:
            for stage, seconds in video.timings.items():
                total[stage] = total.get(stage, 0.0) + seconds
        return total


def video_seed(seed: int, video: str) -> List[int]:
    """Seed sequence of one video, independent of processing order."""
    return [seed, zlib.crc32(video.encode("utf-8"))]


class ProposalPipeline:
    """
    Runs the proposal stages over a set of videos.

    Every failure inside a stage surfaces as a StageError naming the stage
    and the video.
    """

    def __init__(self, config: Optional[PipelineConfig] = None,
                 gmm: Optional[GmmPair] = None,
                 appearance: Optional[Mapping[str, AppearanceSource]] = None):
        self.config = (config or PipelineConfig()).validate()
        self.gmm = gmm
        self._appearance = dict(appearance or {})
        self._progress_callback: Optional[Callable[[str, int], None]] = None

    def set_progress_callback(self, callback: Callable[[str, int], None]) -> None:
        """
        Set a callback for progress updates.

        Args:
            callback: Function receiving (message, percent)
        """
        self._progress_callback = callback

    def _report_progress(self, message: str, percent: int = -1) -> None:
        """Report progress to callback if set."""
        if self._progress_callback:
            self._progress_callback(message, percent)

    @contextmanager
    def _stage(self, name: str, video: Optional[str], timings: Dict[str, float]) -> Iterator[None]:
        try:
            with timed(timings, name):
                yield
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, video, e) from e

    def fit_motion(self, detections: Mapping[str, Frames],
                   ground_truth: Mapping[str, Sequence[GroundTruthTrack]]) -> GmmPair:
        """
        Fit the motion mixtures from detections labeled by ground-truth overlap.

        The component count defaults to the number of action classes.
        """
        positives, negatives = [], []
        for video in sorted(detections):
            tracks = [g.as_mapping() for g in ground_truth.get(video, [])]
            pos, neg = select_motion_samples(detections[video], tracks)
            positives.extend(pos)
            negatives.extend(neg)
        labels = {g.label for tracks in ground_truth.values() for g in tracks}
        timings: Dict[str, float] = {}
        with self._stage("score", None, timings):
            self.gmm = fit_motion_models(positives, negatives, self.config.gmm,
                                         seed=self.config.seed, n_classes=len(labels))
        logger.info(f"Motion mixtures fitted in {format_seconds(timings['score'])}")
        return self.gmm

    def score(self, video: str, frames: Frames) -> None:
        """Fill in the actionness of every detection."""
        lambda_p = self.config.scoring.lambda_p
        if self.gmm is None:
            if all(d.actionness is not None for frame in frames for d in frame) and lambda_p > 0:
                ceiling = 1.0 + lambda_p
                for frame in frames:
                    for d in frame:
                        if not 0.0 <= d.actionness <= ceiling + 1e-9:
                            raise InputError(f"{video}: stored actionness {d.actionness} on frame {d.frame} "
                                             f"is outside [0, {ceiling}]")
                logger.info(f"{video}: keeping the actionness already stored with the detections")
                return
            ActionnessScorer(lambda_p=0.0).score_frames(frames)
        else:
            ActionnessScorer(self.gmm[0], self.gmm[1], lambda_p).score_frames(frames)

    def search(self, frames: Frames) -> List[ActionPath]:
        return forward_backward_search(frames, self.config.search)

    def associate(self, candidates: Sequence[ActionPath]) -> List[PathSet]:
        return extract_all_path_sets(candidates, self.config.association)

    def appearance_for(self, video: str, frames: Frames) -> AppearanceSource:
        return self._appearance.get(video) or DetectionAppearance(frames)

    def complete(self, video: str, frames: Frames, path_sets: Sequence[PathSet],
                 rng: np.random.Generator) -> List[Track]:
        """
        Split every path set into actor tracks and fill their gaps.

        Tracks whose span is shorter than the proposal duration are left
        as they are; completion cannot make them long enough.
        """
        tracks: List[Track] = []
        for path_set in path_sets:
            tracks.extend(split_actor_tracks(path_set, self.config.link, video, first_track_id=len(tracks)))
        appearance = self.appearance_for(video, frames)
        completed = []
        for track in tracks:
            if not track.gaps() or track.duration < self.config.proposals.min_duration:
                completed.append(track)
                continue
            classifier = build_track_classifier(track, frames, self.config.completion, appearance, rng)
            completed.append(complete_track(track, self.config.completion, classifier,
                                            appearance=appearance, rng=rng))
        return completed

    def emit(self, video: str, tracks: Sequence[Track]) -> List[ActionProposal]:
        return emit_with_config(tracks, self.config.proposals, video)

    def process_video(self, video: str, frames: Frames) -> VideoResult:
        """Run every stage on one video."""
        result = VideoResult(video)
        rng = np.random.default_rng(video_seed(self.config.seed, video))
        with self._stage("score", video, result.timings):
            self.score(video, frames)
        with self._stage("search", video, result.timings):
            result.candidates = self.search(frames)
        with self._stage("associate", video, result.timings):
            result.path_sets = self.associate(result.candidates)
            for path_set in result.path_sets:
                path_set.check_constraints()
        with self._stage("complete", video, result.timings):
            result.tracks = self.complete(video, frames, result.path_sets, rng)
        with self._stage("emit", video, result.timings):
            result.proposals = self.emit(video, result.tracks)
        stage_times = ", ".join(f"{s} {format_seconds(result.timings.get(s))}" for s in STAGES)
        logger.info(f"{video}: {len(result.candidates)} candidates, {len(result.path_sets)} path sets, "
                    f"{len(result.proposals)} proposals ({stage_times})")
        return result

    def run(self, detections: Mapping[str, Frames],
            ground_truth: Optional[Mapping[str, Sequence[GroundTruthTrack]]] = None,
            fit_motion: bool = False) -> PipelineResult:
        """
        Process every video.

        Args:
            detections: Per-video frames of detections
            ground_truth: Optional ground truth, used for evaluation and
                (with ``fit_motion``) to fit the motion mixtures
            fit_motion: Fit the motion mixtures from the ground truth first

        Returns:
            PipelineResult with the videos in sorted order
        """
        videos = sorted(detections)
        if fit_motion:
            if not ground_truth:
                raise InputError("fitting the motion mixtures needs ground truth")
            self._report_progress("Fitting motion mixtures...", 0)
            self.fit_motion(detections, ground_truth)
        if self.gmm is None and self.config.scoring.lambda_p > 0 and videos:
            logger.warning("No motion mixtures available; scoring with the human detector alone")

        results: List[VideoResult] = []
        if videos:
            workers = get_worker_count(self.config.workers, len(videos))
            self._report_progress(f"Processing {len(videos)} videos with {workers} workers...", 0)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for done, result in enumerate(pool.map(lambda v: self.process_video(v, detections[v]), videos), 1):
                    results.append(result)
                    self._report_progress(f"{result.video}: {len(result.proposals)} proposals",
                                          int(100 * done / len(videos)))

        outcome = PipelineResult(results, self.gmm)
        if ground_truth:
            outcome.report = evaluate(outcome.proposals_by_video, ground_truth, self.config.evaluation)
        return outcome


def run_pipeline(detections: Mapping[str, Frames], config: Optional[PipelineConfig] = None,
                 gmm: Optional[GmmPair] = None,
                 ground_truth: Optional[Mapping[str, Sequence[GroundTruthTrack]]] = None,
                 appearance: Optional[Mapping[str, AppearanceSource]] = None,
                 fit_motion: bool = False) -> PipelineResult:
    """Convenience wrapper around ProposalPipeline.run."""
    return ProposalPipeline(config, gmm, appearance).run(detections, ground_truth, fit_motion)


def write_outputs(result: PipelineResult, directory: str) -> Dict[str, Path]:
    """
    Write proposals.jsonl, tracks.jsonl and, when evaluated, the metric files.

    Stage timings are not written, so equal runs give equal bytes.
    """
    out = Path(directory)
    paths = {"proposals": out / "proposals.jsonl", "tracks": out / "tracks.jsonl"}
    write_proposals(result.proposals, str(paths["proposals"]))
    write_tracks(result.tracks, str(paths["tracks"]))
    if result.report is not None:
        for name, path in write_report(result.report, str(out)).items():
            paths[f"metrics_{name}"] = path
    return paths
