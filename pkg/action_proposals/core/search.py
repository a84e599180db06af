"""
Candidate path generation.

Builds the pool of best candidate paths by a forward dynamic-programming
pass over the frames (accumulated actionness of the best linkable chain
ending at every box) while maintaining a bounded pool of the top path
candidates. Full paths are recovered from backpointers.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import LinkConfig, SearchConfig
from .errors import InputError, InvariantError
from .geometry import BoundingBox, Detection, appearance_distance, iou

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ActionPath:
    """
    Temporally contiguous chain of detections.

    Attributes:
        detections: One detection per frame in [start_frame, end_frame]
        score: Accumulated actionness, summed from the first frame onward
    """
    detections: Tuple[Detection, ...]
    score: float

    def __post_init__(self):
        if not self.detections:
            raise InputError("a path needs at least one detection")
        object.__setattr__(self, "detections", tuple(self.detections))
        start = self.detections[0].frame
        for offset, detection in enumerate(self.detections):
            if detection.frame != start + offset:
                raise InputError(
                    f"path is not contiguous: expected frame {start + offset}, got {detection.frame}"
                )

    @classmethod
    def from_detections(cls, detections: Sequence[Detection]) -> "ActionPath":
        """Build a path and accumulate its score in frame order."""
        score = 0.0
        for detection in detections:
            score = score + detection.require_actionness()
        return cls(tuple(detections), score)

    @property
    def start_frame(self) -> int:
        return self.detections[0].frame

    @property
    def end_frame(self) -> int:
        return self.detections[-1].frame

    @property
    def duration(self) -> int:
        return len(self.detections)

    @property
    def frames(self) -> range:
        return range(self.start_frame, self.end_frame + 1)

    @property
    def tail(self) -> Detection:
        return self.detections[-1]

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        if self.start_frame <= frame <= self.end_frame:
            return self.detections[frame - self.start_frame].box
        return None

    def detection_at(self, frame: int) -> Optional[Detection]:
        if self.start_frame <= frame <= self.end_frame:
            return self.detections[frame - self.start_frame]
        return None

    @cached_property
    def color_center(self) -> np.ndarray:
        """Mean color histogram of the member boxes."""
        return np.mean([d.color_hist.values for d in self.detections], axis=0)

    @cached_property
    def grad_center(self) -> np.ndarray:
        """Mean gradient histogram of the member boxes."""
        return np.mean([d.grad_hist.values for d in self.detections], axis=0)

    def check(self, link: Optional[LinkConfig] = None) -> None:
        """
        Verify the score and, when ``link`` is given, every consecutive link.

        Raises:
            InvariantError: if the path is inconsistent
        """
        total = math.fsum(d.require_actionness() for d in self.detections)
        if abs(total - self.score) > SCORE_TOLERANCE * max(1.0, abs(total)):
            raise InvariantError(f"path score {self.score} differs from its summed actionness {total}")
        if link is not None:
            for a, b in zip(self.detections, self.detections[1:]):
                if not linkable(a, b, link):
                    raise InvariantError(f"boxes at frames {a.frame} and {b.frame} are not linkable")

    def __repr__(self) -> str:
        return (f"ActionPath(frames={self.start_frame}-{self.end_frame}, "
                f"score={self.score:.4f})")


def linkable(a: Detection, b: Detection, config: Optional[LinkConfig] = None) -> bool:
    """
    Linking predicate between boxes of consecutive frames.

    True when the boxes overlap by at least eta_o and their appearance
    distance (color plus lambda_a times gradient) is at most eta_f.

    Raises:
        InputError: if b is not on the frame right after a
    """
    config = config or LinkConfig()
    if b.frame != a.frame + 1:
        raise InputError(f"non-adjacent link query: frames {a.frame} and {b.frame}")
    if iou(a.box, b.box) < config.eta_o:
        return False
    distance = appearance_distance(a.color_hist, b.color_hist, a.grad_hist, b.grad_hist, config.lambda_a)
    return distance <= config.eta_f


class _Node:
    """Backpointer chain node: a detection and the accumulated score up to it."""

    __slots__ = ("detection", "score", "parent")

    def __init__(self, detection: Detection, score: float, parent: Optional["_Node"]):
        self.detection = detection
        self.score = score
        self.parent = parent

    def chain(self) -> List[Detection]:
        out = []
        node = self
        while node is not None:
            out.append(node.detection)
            node = node.parent
        out.reverse()
        return out


@dataclass
class _PoolEntry:
    node: _Node
    sequence: int

    @property
    def sort_key(self) -> Tuple[float, int, int, int]:
        tail = self.node.detection
        return (-self.node.score, tail.frame, tail.index, self.sequence)


class CandidatePool:
    """
    Bounded pool of the best path candidates.

    Entries are kept sorted by score descending; ties favor the lowest
    tail (frame, index), then the earlier insertion.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InputError(f"pool capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: List[_PoolEntry] = []
        self._sequence = itertools.count()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[_Node]:
        return (entry.node for entry in self._entries)

    @property
    def is_full(self) -> bool:
        return len(self._entries) >= self.capacity

    @property
    def weakest_score(self) -> float:
        """Score of the weakest entry, or -inf when the pool is not full."""
        if not self.is_full:
            return -math.inf
        return self._entries[-1].node.score

    def _sort(self) -> None:
        self._entries.sort(key=lambda entry: entry.sort_key)

    def extend(self, frame: int, frame_nodes: Sequence[_Node], config: LinkConfig) -> int:
        """
        Grow every entry whose tail sits on the previous frame.

        Each such entry is extended by its linkable successor with the
        highest accumulated score; entries without a successor stay as
        they are.

        Returns:
            Number of extended entries
        """
        ordered = sorted(frame_nodes, key=lambda n: (-n.score, n.detection.index))
        extended = 0
        for entry in self._entries:
            tail = entry.node.detection
            if tail.frame != frame - 1:
                continue
            successor = next((n for n in ordered if linkable(tail, n.detection, config)), None)
            if successor is None:
                continue
            if successor.parent is entry.node:
                entry.node = successor
            else:
                entry.node = _Node(successor.detection, entry.node.score + successor.detection.actionness, entry.node)
            extended += 1
        self._sort()
        return extended

    def offer(self, node: _Node) -> bool:
        """
        Insert a chain if it beats the weakest entry.

        Returns:
            True if the chain entered the pool
        """
        if any(entry.node is node for entry in self._entries):
            return False
        if self.is_full:
            if not node.score > self.weakest_score:
                return False
            self._entries.pop()
        self._entries.append(_PoolEntry(node, next(self._sequence)))
        self._sort()
        return True

    def paths(self) -> List[ActionPath]:
        """Trace every entry back to a full path, best first."""
        return [ActionPath(tuple(entry.node.chain()), entry.node.score) for entry in self._entries]


def check_frames(frames: Sequence[Sequence[Detection]]) -> None:
    for t, detections in enumerate(frames):
        for detection in detections:
            if detection.frame != t:
                raise InputError(
                    f"detection with frame {detection.frame} listed under frame {t}"
                )
            detection.require_actionness()


def forward_backward_search(frames: Sequence[Sequence[Detection]],
                            config: Optional[SearchConfig] = None) -> List[ActionPath]:
    """
    Forward search with a top-N candidate pool, then backward track.

    For every box the best accumulated score over its linkable
    predecessors is computed (a box without linkable predecessor starts a
    new chain). The pool is updated per frame in two steps: entries ending
    on the previous frame are extended by their best successor, then any
    box whose score beats the weakest entry enters the pool.

    Args:
        frames: Scored detections, frames[t] holding the boxes of frame t
        config: Pool size and linking thresholds

    Returns:
        At most pool_size paths, sorted by score descending
    """
    config = config or SearchConfig()
    check_frames(frames)
    pool = CandidatePool(config.pool_size)
    previous: List[_Node] = []

    for t, detections in enumerate(frames):
        current: List[_Node] = []
        for detection in sorted(detections, key=lambda d: d.index):
            best: Optional[_Node] = None
            for candidate in previous:
                if linkable(candidate.detection, detection, config.link):
                    if best is None or candidate.score > best.score:
                        best = candidate
            if best is None:
                current.append(_Node(detection, detection.actionness, None))
            else:
                current.append(_Node(detection, best.score + detection.actionness, best))

        pool.extend(t, current, config.link)
        for node in sorted(current, key=lambda n: (-n.score, n.detection.index)):
            pool.offer(node)
        previous = current

    paths = pool.paths()
    if paths:
        logger.debug(f"Search kept {len(paths)} candidates; best score {paths[0].score:.4f}")
    return paths

