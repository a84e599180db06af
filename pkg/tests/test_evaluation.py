from types import SimpleNamespace

import pandas as pd
import pytest

from action_proposals.core.completion import Track, TrackEntry
from action_proposals.core.config import EvaluationConfig
from action_proposals.core.errors import InputError
from action_proposals.core.evaluation import (ALL_CLASSES, GroundTruthTrack, abo_mabo, evaluate, recall_at,
                                              recall_curve, track_iou, write_report)
from action_proposals.core.geometry import BoundingBox


def box(frame, x=0.0, w=10.0):
    return BoundingBox.from_corners(frame, x, 0.0, x + w, 10.0)


def gt(frames, label="a", video="v", track_id=0, x=0.0):
    frames = list(frames)
    return GroundTruthTrack(video, track_id, label, frames[0], [box(f, x) for f in frames])


def proposal(frames, video="v", x=0.0):
    return Track([TrackEntry(f, box(f, x)) for f in frames], video=video)


class TestGroundTruthTrack:
    def test_unannotated_frames(self):
        g = GroundTruthTrack("v", 0, "a", 3, [box(3), None, box(5)])
        assert g.frames == [3, 5]
        assert g.end_frame == 5
        assert g.box_at(4) is None
        assert g.box_at(9) is None
        assert set(g.as_mapping()) == {3, 5}

    def test_rejects_misplaced_box(self):
        with pytest.raises(InputError):
            GroundTruthTrack("v", 0, "a", 0, [box(1)])

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            GroundTruthTrack("v", 0, "a", 0, [None])


class TestTrackIou:
    def test_identical(self):
        assert track_iou(gt(range(10)), proposal(range(10))) == pytest.approx(1.0, abs=1e-12)

    def test_half_the_frames(self):
        assert track_iou(gt(range(10)), proposal(range(5))) == pytest.approx(0.5, abs=1e-12)

    def test_disjoint_in_time(self):
        assert track_iou(gt(range(10)), proposal(range(20, 30))) == pytest.approx(0.0, abs=1e-12)

    def test_spatial_overlap(self):
        assert track_iou(gt(range(4)), proposal(range(4), x=5.0)) == pytest.approx(1.0 / 3.0)

    def test_symmetric(self):
        g, p = gt(range(10)), proposal(range(3, 15), x=2.0)
        assert track_iou(g, p) == pytest.approx(track_iou(p, g))

    def test_nothing_to_compare(self):
        empty = SimpleNamespace(frames=[], box_at=lambda frame: None)
        with pytest.raises(InputError, match="no comparable frames"):
            track_iou(empty, empty)


class TestRecall:
    def test_matching_is_one_to_one(self):
        gts = {"v": [gt(range(10), track_id=0), gt(range(10), track_id=1)]}
        assert recall_at({"v": [proposal(range(10))]}, gts) == 0.5
        assert recall_at({"v": [proposal(range(10)), proposal(range(10))]}, gts) == 1.0

    def test_threshold_inclusive(self):
        gts = {"v": [gt(range(10))]}
        props = {"v": [proposal(range(5))]}
        assert recall_at(props, gts, eta=0.5) == 1.0
        assert recall_at(props, gts, eta=0.51) == 0.0

    def test_flat_lists_grouped_by_video(self):
        gts = [gt(range(10), video="a"), gt(range(10), video="b")]
        props = [proposal(range(10), video="a"), proposal(range(10), video="c")]
        assert recall_at(props, gts) == 0.5

    def test_curve_non_increasing(self):
        gts = {"v": [gt(range(10), track_id=k) for k in range(4)]}
        props = {"v": [proposal(range(n)) for n in (2, 5, 8, 10)]}
        thresholds = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        curve = recall_curve(props, gts, thresholds)
        assert list(curve.columns) == ["eta", "recall"]
        values = curve["recall"].tolist()
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert values[0] == 1.0
        assert values[-1] == 0.25

    def test_needs_ground_truth(self):
        with pytest.raises(InputError):
            recall_at({"v": [proposal(range(3))]}, {})


class TestAboMabo:
    def test_class_average(self):
        gts = {"v": [gt(range(10), "a", track_id=0), gt(range(20, 30), "a", track_id=1),
                     gt(range(10), "b", track_id=2)]}
        props = {"v": [proposal(range(10))]}
        abo, mabo, table = abo_mabo(props, gts)
        assert abo == pytest.approx(2.0 / 3.0)
        assert mabo == pytest.approx(0.75)
        assert table["label"].tolist() == ["a", "b"]
        assert table["n_gt"].tolist() == [2, 1]
        assert table["abo"].tolist() == pytest.approx([0.5, 1.0])

    def test_no_proposals(self):
        abo, mabo, _ = abo_mabo({}, {"v": [gt(range(5))]})
        assert abo == 0.0 and mabo == 0.0


class TestReport:
    @pytest.fixture
    def report(self):
        gts = {"v": [gt(range(10), "a", track_id=0), gt(range(10), "b", track_id=1)],
               "w": [gt(range(5), "a", video="w")]}
        props = {"v": [proposal(range(10)), proposal(range(5))], "x": [proposal(range(3), video="x")]}
        return evaluate(props, gts, EvaluationConfig(eta=0.5))

    def test_counts(self, report):
        assert report.n_videos == 3
        assert report.n_ground_truth == 3
        assert report.n_proposals == 3
        assert report.proposals_per_video == 1.0
        assert report.recall == pytest.approx(2.0 / 3.0)
        assert report.abo == pytest.approx(2.0 / 3.0)
        assert report.mabo == pytest.approx(0.5 * (0.5 + 1.0))
        assert "recall@0.5=0.6667" in report.summary()

    def test_to_dict(self, report):
        data = report.to_dict()
        assert [c["label"] for c in data["per_class"]] == ["a", "b"]
        assert len(data["recall_curve"]) == 9

    def test_write_report(self, report, tmp_path):
        paths = write_report(report, str(tmp_path / "metrics"))
        assert set(paths) == {"json", "csv", "curve"}
        table = pd.read_csv(paths["csv"])
        assert table["label"].tolist() == ["a", "b", ALL_CLASSES]
        assert table.iloc[-1]["n_gt"] == 3
        curve = pd.read_csv(paths["curve"])
        assert len(curve) == 9
