"""
Path-set association.

Selects groups of candidate paths that together cover as much actionness
as possible (distinct boxes counted once), are mutually non-redundant
(pairwise path overlap at most eta_p) and, through the similarity bonus,
look like the same actor. Selection is greedy; sets are extracted one
after another until the remaining candidates are too short.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from scipy.special import expit

from .config import AssocConfig
from .errors import InvariantError
from .geometry import center_distance, path_overlap
from .search import ActionPath

logger = logging.getLogger(__name__)


@dataclass
class PathSet:
    """
    Paths attributed to one actor.

    Attributes:
        paths: Selected paths, in selection order
        max_paths: Cardinality cap N
        eta_p: Pairwise overlap threshold
        candidate_indices: Index of every selected path in the candidate list
        objective_trace: Objective value after each accepted path
    """
    paths: List[ActionPath] = field(default_factory=list)
    max_paths: int = 12
    eta_p: float = 0.3
    candidate_indices: List[int] = field(default_factory=list)
    objective_trace: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else 0.0

    @property
    def longest_duration(self) -> int:
        return max((p.duration for p in self.paths), default=0)

    def check_constraints(self) -> None:
        """
        Raises:
            InvariantError: if the cardinality or the overlap constraint is violated
        """
        if len(self.paths) > self.max_paths:
            raise InvariantError(f"path set holds {len(self.paths)} paths, cap is {self.max_paths}")
        for i, p in enumerate(self.paths):
            for q in self.paths[i + 1:]:
                overlap = path_overlap(p, q)
                if overlap > self.eta_p:
                    raise InvariantError(f"paths {p} and {q} overlap by {overlap:.4f} > {self.eta_p}")


def path_similarity(p: ActionPath, q: ActionPath, lambda_a: float = 1.0, cap: float = 1e3) -> float:
    """
    Inverse appearance distance between the feature centers of two paths.

    Returns:
        1 / distance, or ``cap`` when the distance is below 1 / cap
    """
    distance = center_distance(p.color_center, q.color_center, p.grad_center, q.grad_center, lambda_a)
    if distance < 1.0 / cap:
        return cap
    return 1.0 / distance


def coverage_score(paths: Iterable[ActionPath]) -> float:
    """Summed actionness of the distinct detections covered by the paths."""
    seen: Dict[int, float] = {}
    for path in paths:
        for detection in path.detections:
            seen.setdefault(id(detection), detection.require_actionness())
    return math.fsum(seen.values())


def path_set_objective(paths: Sequence[ActionPath], config: Optional[AssocConfig] = None) -> float:
    """
    Coverage plus the similarity bonus of every path after the first.

    The m-th path (m >= 1) adds sigma of its mean similarity to the paths
    before it, so the value depends on the order of ``paths``.
    """
    config = config or AssocConfig()
    value = coverage_score(paths)
    if config.use_similarity:
        for m in range(1, len(paths)):
            value += _similarity_bonus(paths[m], paths[:m], config)
    return value


def _similarity_bonus(path: ActionPath, members: Sequence[ActionPath], config: AssocConfig) -> float:
    total = sum(path_similarity(path, member, config.lambda_a, config.similarity_cap) for member in members)
    return float(expit(total / len(members)))


class _OverlapCache:
    """Symmetric memo of path_overlap keyed by candidate index."""

    def __init__(self, candidates: Sequence[ActionPath]):
        self._candidates = candidates
        self._values: Dict[Tuple[int, int], float] = {}

    def __call__(self, i: int, j: int) -> float:
        key = (i, j) if i < j else (j, i)
        value = self._values.get(key)
        if value is None:
            value = path_overlap(self._candidates[i], self._candidates[j])
            self._values[key] = value
        return value


def _greedy(candidates: Sequence[ActionPath], available: Sequence[int],
            config: AssocConfig, overlap: _OverlapCache) -> PathSet:
    result = PathSet(max_paths=config.max_paths, eta_p=config.eta_p)
    if not available:
        return result

    seed = min(available, key=lambda i: (-candidates[i].score, i))
    selected = [seed]
    covered = {id(d) for d in candidates[seed].detections}
    coverage = coverage_score([candidates[seed]])
    result.paths.append(candidates[seed])
    result.candidate_indices.append(seed)
    result.objective_trace.append(path_set_objective(result.paths, config))

    feasible = [i for i in available if i != seed and overlap(seed, i) <= config.eta_p]
    similarity_sums = {i: 0.0 for i in feasible}

    while len(selected) < config.max_paths and feasible:
        newest = selected[-1]
        if config.use_similarity:
            for i in feasible:
                similarity_sums[i] += path_similarity(
                    candidates[i], candidates[newest], config.lambda_a, config.similarity_cap
                )

        best_index, best_value = None, -math.inf
        for i in feasible:
            gain = math.fsum(d.actionness for d in candidates[i].detections if id(d) not in covered)
            value = coverage + gain
            if config.use_similarity:
                value += float(expit(similarity_sums[i] / len(selected)))
            if value > best_value:
                best_index, best_value = i, value
        logger.debug(f"Greedy step {len(selected)}: candidate {best_index} reaches {best_value:.4f}")

        chosen = candidates[best_index]
        selected.append(best_index)
        covered.update(id(d) for d in chosen.detections)
        coverage = coverage_score(candidates[i] for i in selected)
        result.paths.append(chosen)
        result.candidate_indices.append(best_index)
        result.objective_trace.append(path_set_objective(result.paths, config))
        feasible = [i for i in feasible if i != best_index and overlap(best_index, i) <= config.eta_p]

    return result


def greedy_associate(candidates: Sequence[ActionPath], config: Optional[AssocConfig] = None) -> PathSet:
    """
    Greedy selection of one path set.

    Seeds with the highest-scoring candidate (lowest index on ties), then
    repeatedly adds the feasible candidate that maximizes coverage of the
    union plus sigma of its mean similarity to the current members.
    Stops at max_paths or when no candidate stays within eta_p overlap
    of every member.

    Args:
        candidates: Candidate paths
        config: Cardinality, overlap and similarity parameters

    Returns:
        PathSet (empty when there are no candidates)
    """
    config = config or AssocConfig()
    return _greedy(candidates, list(range(len(candidates))), config, _OverlapCache(candidates))


def extract_all_path_sets(candidates: Sequence[ActionPath], config: Optional[AssocConfig] = None) -> List[PathSet]:
    """
    Extract path sets one after another.

    The paths of each set are removed from the candidates before the next
    greedy run. The first set is always kept; extraction stops once the
    next set's longest path is shorter than min_path_duration.

    Returns:
        Path sets whose candidate_indices refer to positions in the candidate list
    """
    config = config or AssocConfig()
    overlap = _OverlapCache(candidates)
    remaining = list(range(len(candidates)))
    sets: List[PathSet] = []
    while remaining:
        path_set = _greedy(candidates, remaining, config, overlap)
        if sets and path_set.longest_duration < config.min_path_duration:
            break
        sets.append(path_set)
        taken = set(path_set.candidate_indices)
        remaining = [i for i in remaining if i not in taken]
    logger.debug(f"Extracted {len(sets)} path sets from {len(candidates)} candidates")
    return sets
