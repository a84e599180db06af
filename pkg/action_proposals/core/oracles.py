"""
Exhaustive reference solvers for small instances.

Both enumerate the whole search space and refuse instances whose space
exceeds a guard, raising OracleLimitError.
"""

import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple

from .association import PathSet, path_set_objective
from .config import AssocConfig, SearchConfig
from .errors import InputError, OracleLimitError
from .geometry import Detection, path_overlap
from .search import ActionPath, check_frames, linkable

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 1_000_000


def _count_chains(frames: Sequence[Sequence[Detection]], config: SearchConfig) -> int:
    """Number of link-valid chains, counted by dynamic programming."""
    total = 0
    previous: List[Tuple[Detection, int]] = []
    for detections in frames:
        current = []
        for detection in detections:
            ending = 1 + sum(count for pred, count in previous if linkable(pred, detection, config.link))
            current.append((detection, ending))
            total += ending
        previous = current
    return total


def brute_force_best_path(frames: Sequence[Sequence[Detection]],
                          config: Optional[SearchConfig] = None,
                          limit: int = ENUMERATION_LIMIT) -> ActionPath:
    """
    Best link-valid chain by exhaustive enumeration.

    Every chain (any start, any end) is scored by summing actionness from
    its first frame on. Ties go to the lowest tail (frame, index), then to
    the lexicographically smallest list of (frame, index) keys.

    Raises:
        InputError: if there is no detection at all
        OracleLimitError: if more than ``limit`` chains exist
    """
    config = config or SearchConfig()
    if not any(frames):
        raise InputError("no detections to search")
    check_frames(frames)
    count = _count_chains(frames, config)
    if count > limit:
        raise OracleLimitError(f"{count} chains exceed the enumeration limit of {limit}")

    best: Optional[Tuple[float, List[Detection]]] = None

    def better(score: float, chain: List[Detection]) -> bool:
        if best is None:
            return True
        best_score, best_chain = best
        if score != best_score:
            return score > best_score
        key = (chain[-1].key, [d.key for d in chain])
        best_key = (best_chain[-1].key, [d.key for d in best_chain])
        return key < best_key

    stack: List[Tuple[List[Detection], float]] = []
    for detections in frames:
        for detection in sorted(detections, key=lambda d: d.index):
            stack.append(([detection], detection.require_actionness()))
    while stack:
        chain, score = stack.pop()
        if better(score, chain):
            best = (score, chain)
        tail = chain[-1]
        if tail.frame + 1 < len(frames):
            for successor in frames[tail.frame + 1]:
                if linkable(tail, successor, config.link):
                    stack.append((chain + [successor], score + successor.require_actionness()))

    score, chain = best
    return ActionPath(tuple(chain), score)


def _ordered_for_objective(indices: Sequence[int], candidates: Sequence[ActionPath]) -> List[int]:
    return sorted(indices, key=lambda i: (-candidates[i].score, i))


def brute_force_best_path_set(candidates: Sequence[ActionPath], config: Optional[AssocConfig] = None,
                              limit: int = ENUMERATION_LIMIT) -> PathSet:
    """
    Best feasible path set by exhaustive subset search.

    Every subset of at most max_paths candidates whose pairwise overlaps
    stay within eta_p is scored with path_set_objective, its paths ordered
    by score descending then candidate index. Ties keep the subset found
    first (smaller subsets first, then lexicographic index order).

    Raises:
        OracleLimitError: if more than ``limit`` subsets would be enumerated
    """
    config = config or AssocConfig()
    n = len(candidates)
    if n == 0:
        return PathSet(max_paths=config.max_paths, eta_p=config.eta_p)
    sizes = range(1, min(config.max_paths, n) + 1)
    total = sum(math.comb(n, k) for k in sizes)
    if total > limit:
        raise OracleLimitError(f"{total} subsets exceed the enumeration limit of {limit}")

    overlaps = {}
    for i, j in itertools.combinations(range(n), 2):
        overlaps[(i, j)] = path_overlap(candidates[i], candidates[j])

    best_value, best_subset = -math.inf, None
    for k in sizes:
        for subset in itertools.combinations(range(n), k):
            if any(overlaps[pair] > config.eta_p for pair in itertools.combinations(subset, 2)):
                continue
            ordered = _ordered_for_objective(subset, candidates)
            value = path_set_objective([candidates[i] for i in ordered], config)
            if value > best_value:
                best_value, best_subset = value, ordered

    logger.debug(f"Subset oracle enumerated {total} subsets; best value {best_value:.4f}")
    return PathSet(
        paths=[candidates[i] for i in best_subset],
        max_paths=config.max_paths,
        eta_p=config.eta_p,
        candidate_indices=list(best_subset),
        objective_trace=[best_value],
    )
