import math

import numpy as np
import pytest
from scipy.special import expit

from action_proposals.core.association import (PathSet, coverage_score, extract_all_path_sets, greedy_associate,
                                               path_set_objective, path_similarity)
from action_proposals.core.config import AssocConfig
from action_proposals.core.errors import InvariantError
from action_proposals.core.geometry import path_overlap
from action_proposals.core.oracles import brute_force_best_path_set
from action_proposals.core.search import ActionPath

GREEDY_BOUND = 1.0 - 1.0 / math.e


def random_candidates(make_detection, rng, n_paths, n_frames=8, boxes=3):
    """Random contiguous paths drawn from a shared grid of scored boxes."""
    grid = [
        [make_detection(t, cx=float(rng.uniform(30.0, 70.0)), actionness=float(rng.uniform(0.1, 1.0)), index=k,
                        color=rng.dirichlet(np.ones(4)), grad=rng.dirichlet(np.ones(4)))
         for k in range(boxes)]
        for t in range(n_frames)
    ]
    paths = []
    for _ in range(n_paths):
        start = int(rng.integers(0, n_frames))
        length = int(rng.integers(1, n_frames - start + 1))
        paths.append(ActionPath.from_detections(
            [grid[t][int(rng.integers(boxes))] for t in range(start, start + length)]
        ))
    return paths


class TestObjective:
    def test_shared_boxes_count_once(self, make_detection):
        d0 = make_detection(0, actionness=1.0)
        d1 = make_detection(1, actionness=2.0)
        d1b = make_detection(1, actionness=4.0, index=1)
        p = ActionPath.from_detections([d0, d1])
        q = ActionPath.from_detections([d0, d1b])
        assert coverage_score([p, q]) == 7.0

    def test_similarity_capped_for_identical_appearance(self, make_path):
        assert path_similarity(make_path(0, 3), make_path(5, 3)) == 1e3
        assert path_similarity(make_path(0, 3), make_path(5, 3), cap=50.0) == 50.0

    def test_similarity_is_inverse_distance(self, make_path):
        p = make_path(0, 3, color=[1, 0])
        q = make_path(5, 3, color=[0, 1])
        assert path_similarity(p, q) == pytest.approx(1.0 / math.sqrt(2.0))

    def test_objective_adds_similarity_bonus(self, make_path):
        p, q = make_path(0, 3), make_path(5, 3)
        with_bonus = path_set_objective([p, q], AssocConfig())
        coverage_only = path_set_objective([p, q], AssocConfig(use_similarity=False))
        assert coverage_only == 6.0
        assert with_bonus == pytest.approx(6.0 + float(expit(1e3)))


class TestGreedyAssociate:
    def test_empty_candidates(self):
        assert len(greedy_associate([])) == 0
        assert extract_all_path_sets([]) == []

    def test_seeds_with_best_path(self, make_path):
        phi = [make_path(0, 5, actionness=0.5), make_path(10, 5, actionness=1.0)]
        result = greedy_associate(phi, AssocConfig(max_paths=1))
        assert result.candidate_indices == [1]

    def test_overlapping_candidates_excluded(self, make_path):
        phi = [make_path(0, 10), make_path(0, 10), make_path(20, 10)]
        result = greedy_associate(phi, AssocConfig(max_paths=3))
        assert result.candidate_indices == [0, 2]
        result.check_constraints()

    def test_objective_trace_non_decreasing(self, make_detection):
        rng = np.random.default_rng(7)
        phi = random_candidates(make_detection, rng, 10)
        result = greedy_associate(phi, AssocConfig(max_paths=5, eta_p=1.0))
        trace = result.objective_trace
        assert len(trace) == len(result)
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_coverage_greedy_within_bound_of_oracle(self, make_detection):
        config = AssocConfig(max_paths=3, eta_p=1.0, use_similarity=False)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            phi = random_candidates(make_detection, rng, 8)
            greedy = greedy_associate(phi, config)
            best = brute_force_best_path_set(phi, config)
            assert greedy.objective >= GREEDY_BOUND * best.objective - 1e-12, f"seed {seed}"
            assert greedy.objective <= best.objective + 1e-9

    def test_ratio_with_similarity_is_reported(self, make_detection):
        config = AssocConfig(max_paths=3, eta_p=1.0)
        ratios = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            phi = random_candidates(make_detection, rng, 8)
            ratios.append(greedy_associate(phi, config).objective / brute_force_best_path_set(phi, config).objective)
        assert all(r > 0.0 for r in ratios)


class TestConstraints:
    def test_check_constraints_flags_overlap(self, make_path):
        p = make_path(0, 10)
        path_set = PathSet(paths=[p, make_path(0, 10)], max_paths=5, eta_p=0.3)
        with pytest.raises(InvariantError):
            path_set.check_constraints()

    def test_check_constraints_flags_cardinality(self, make_path):
        path_set = PathSet(paths=[make_path(0, 2), make_path(5, 2)], max_paths=1)
        with pytest.raises(InvariantError):
            path_set.check_constraints()

    def test_fuzzed_pools_never_violate(self, make_detection):
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            phi = random_candidates(make_detection, rng, int(rng.integers(1, 11)))
            config = AssocConfig(max_paths=int(rng.integers(1, 5)), eta_p=float(rng.uniform(0.0, 0.6)),
                                 min_path_duration=int(rng.integers(1, 6)))
            taken = set()
            for path_set in extract_all_path_sets(phi, config):
                assert 1 <= len(path_set) <= config.max_paths
                for i, p in enumerate(path_set.paths):
                    for q in path_set.paths[i + 1:]:
                        assert path_overlap(p, q) <= config.eta_p
                assert taken.isdisjoint(path_set.candidate_indices)
                taken.update(path_set.candidate_indices)


class TestExtractAll:
    def test_first_set_always_kept(self, make_path):
        sets = extract_all_path_sets([make_path(0, 3)], AssocConfig(min_path_duration=10))
        assert len(sets) == 1

    def test_stops_at_short_remainder(self, make_path):
        phi = [make_path(0, 12), make_path(20, 3)]
        sets = extract_all_path_sets(phi, AssocConfig(max_paths=1, min_path_duration=10))
        assert [s.candidate_indices for s in sets] == [[0]]

    def test_one_set_per_actor_when_sets_hold_one_path(self, make_path):
        left, right = make_path(0, 30, cx=50.0), make_path(0, 30, cx=300.0, actionness=0.9)
        fragments = [make_path(0, 8, cx=50.0), make_path(20, 8, cx=300.0)]
        sets = extract_all_path_sets([fragments[0], right, left, fragments[1]],
                                     AssocConfig(max_paths=1, min_path_duration=10))
        assert [s.candidate_indices for s in sets] == [[2], [1]]
        assert sets[0].paths == [left] and sets[1].paths == [right]

    def test_extracts_until_candidates_run_out(self, make_path):
        phi = [make_path(0, 12), make_path(0, 12, actionness=0.5)]
        sets = extract_all_path_sets(phi, AssocConfig(max_paths=2, min_path_duration=10))
        assert [s.candidate_indices for s in sets] == [[0], [1]]
