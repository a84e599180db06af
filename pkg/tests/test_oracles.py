import pytest

from action_proposals.core.config import AssocConfig
from action_proposals.core.errors import InputError, OracleLimitError
from action_proposals.core.oracles import brute_force_best_path, brute_force_best_path_set


class TestBestPathOracle:
    def test_picks_the_heaviest_chain(self, make_detection):
        frames = [
            [make_detection(0, actionness=0.2), make_detection(0, cx=150.0, actionness=0.9, index=1)],
            [make_detection(1, actionness=0.2), make_detection(1, cx=150.0, actionness=0.9, index=1)],
        ]
        path = brute_force_best_path(frames)
        assert path.score == pytest.approx(1.8)
        assert all(d.index == 1 for d in path.detections)

    def test_limit(self, make_detection):
        # 2 + 6 + 14 chains over three frames of two stacked boxes
        frames = [[make_detection(t, actionness=0.5), make_detection(t, actionness=0.5, index=1)] for t in range(3)]
        with pytest.raises(OracleLimitError):
            brute_force_best_path(frames, limit=21)
        assert brute_force_best_path(frames, limit=22).duration == 3

    def test_no_detections(self):
        with pytest.raises(InputError):
            brute_force_best_path([[], []])


class TestBestPathSetOracle:
    def test_limit(self, make_path):
        phi = [make_path(10 * k, 5) for k in range(5)]
        with pytest.raises(OracleLimitError):
            brute_force_best_path_set(phi, AssocConfig(max_paths=12), limit=30)
        assert len(brute_force_best_path_set(phi, AssocConfig(max_paths=12), limit=31)) == 5

    def test_empty(self):
        assert len(brute_force_best_path_set([])) == 0

    def test_limit_error_is_an_input_error(self):
        assert issubclass(OracleLimitError, InputError)
