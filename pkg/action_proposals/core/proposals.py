"""
Proposal emission: completed tracks that last long enough become action proposals.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

from .completion import BoxSource, Track
from .config import ProposalConfig
from .errors import InputError
from .geometry import BoundingBox

logger = logging.getLogger(__name__)


@dataclass
class ActionProposal:
    """
    A contiguous track emitted as an action proposal.

    Attributes:
        track: Gap-free track
        video: Video identifier
        proposal_id: Rank of the proposal within its video
        score: Summed actionness of the detected boxes
    """
    track: Track
    video: str = ""
    proposal_id: int = 0
    score: float = 0.0

    def __post_init__(self):
        if not self.track.is_contiguous:
            raise InputError(f"proposal {self.proposal_id} of {self.video!r} has missing frames")

    @property
    def start_frame(self) -> int:
        return self.track.start_frame

    @property
    def end_frame(self) -> int:
        return self.track.end_frame

    @property
    def duration(self) -> int:
        return self.track.duration

    @property
    def frames(self) -> List[int]:
        return self.track.frames

    @property
    def completed_count(self) -> int:
        return sum(1 for e in self.track.entries if e.source is BoxSource.COMPLETED)

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        return self.track.box_at(frame)


def emit_proposals(tracks: Sequence[Track], min_duration: int = 20,
                   strict: bool = False, video: Optional[str] = None) -> List[ActionProposal]:
    """
    Keep the tracks that last at least ``min_duration`` frames.

    Tracks with open gaps are cut into contiguous pieces first. The result
    is ordered by descending summed actionness (stable for ties) and
    numbered from 0.

    Args:
        tracks: Completed tracks
        min_duration: Minimum frame count
        strict: Require more than ``min_duration`` frames instead
        video: Video identifier stamped on the proposals (defaults to each track's)

    Returns:
        Proposals, best first
    """
    if min_duration < 1:
        raise InputError(f"min_duration must be >= 1, got {min_duration}")
    pieces = [piece for track in tracks for piece in track.split_contiguous()]
    kept = [p for p in pieces if (p.duration > min_duration if strict else p.duration >= min_duration)]
    kept.sort(key=lambda t: -t.score)
    proposals = []
    for i, track in enumerate(kept):
        owner = track.video if video is None else video
        proposals.append(ActionProposal(replace(track, video=owner, track_id=i), video=owner,
                                        proposal_id=i, score=track.score))
    logger.debug(f"Emitted {len(proposals)} of {len(pieces)} track pieces (min duration {min_duration})")
    return proposals


def emit_with_config(tracks: Sequence[Track], config: Optional[ProposalConfig] = None,
                     video: Optional[str] = None) -> List[ActionProposal]:
    config = config or ProposalConfig()
    return emit_proposals(tracks, config.min_duration, config.strict, video)
