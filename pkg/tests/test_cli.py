import json

import numpy as np
import pytest

from action_proposals.app import ProposalApp
from action_proposals.core.formats import read_detections, read_proposals, write_motion_samples
from action_proposals.core.geometry import FeatureHistogram


def cli(*argv):
    return ProposalApp().run([str(a) for a in argv])


@pytest.fixture
def single(tmp_path):
    out = tmp_path / "data"
    assert cli("generate", "--preset", "single-actor", "--seed", 2, "-o", out) == 0
    return out


class TestGenerate:
    def test_writes_scenario_files(self, single):
        assert (single / "scenarios" / "single.json").exists()
        detections = read_detections(str(single / "detections.jsonl"))
        assert len(detections["single"]) == 60
        assert all(d.actionness is None for frame in detections["single"] for d in frame)
        records = [json.loads(line) for line in (single / "ground_truth.jsonl").read_text().splitlines()]
        assert [r["label"] for r in records] == ["walk"]

    def test_count_suffixes_videos(self, tmp_path):
        assert cli("generate", "--count", 2, "--frames", 30, "--seed", 5, "-o", tmp_path) == 0
        names = sorted(p.name for p in (tmp_path / "scenarios").iterdir())
        assert names == ["crossing-000.json", "crossing-001.json"]
        seeds = [json.loads((tmp_path / "scenarios" / n).read_text())["seed"] for n in names]
        assert seeds == [5, 6]

    def test_from_spec_file(self, single, tmp_path):
        out = tmp_path / "again"
        assert cli("generate", "--spec", single / "scenarios" / "single.json", "-o", out) == 0
        assert (out / "detections.jsonl").read_bytes() == (single / "detections.jsonl").read_bytes()

    def test_bad_count(self, tmp_path, capsys):
        assert cli("generate", "--count", 0, "-o", tmp_path) == 1
        assert "--count" in capsys.readouterr().err


class TestRun:
    def test_end_to_end(self, single, tmp_path, capsys):
        out = tmp_path / "run"
        code = cli("run", "--detections", single / "detections.jsonl",
                   "--ground-truth", single / "ground_truth.jsonl",
                   "--scenario", single / "scenarios" / "single.json", "-o", out)
        assert code == 0
        assert "recall@0.5=1.0000" in capsys.readouterr().out
        proposals = read_proposals(str(out / "proposals.jsonl"))
        assert len(proposals["single"]) == 1
        for name in ("tracks.jsonl", "metrics.json", "metrics.csv", "recall_curve.csv"):
            assert (out / name).exists()

    def test_same_input_same_bytes(self, single, tmp_path):
        for run in ("a", "b"):
            assert cli("run", "--detections", single / "detections.jsonl",
                       "--ground-truth", single / "ground_truth.jsonl", "-o", tmp_path / run) == 0
        for name in ("proposals.jsonl", "tracks.jsonl", "metrics.json", "metrics.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_empty_detection_file(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        assert cli("run", "--detections", empty, "-o", tmp_path / "out") == 0
        assert (tmp_path / "out" / "proposals.jsonl").read_text() == ""

    def test_fitted_mixtures(self, tmp_path):
        data = tmp_path / "data"
        assert cli("generate", "--frames", 40, "-o", data) == 0
        assert cli("score", "--detections", data / "detections.jsonl", "--fit-gt", data / "ground_truth.jsonl",
                   "--save-gmm", tmp_path / "gmm.json", "-o", tmp_path / "scored") == 0
        assert (tmp_path / "gmm.json").exists()
        scored = read_detections(str(tmp_path / "scored" / "scored_detections.jsonl"))
        assert all(d.actionness is not None for frame in scored["crossing"] for d in frame)
        assert cli("run", "--detections", data / "detections.jsonl", "--gmm", tmp_path / "gmm.json",
                   "-o", tmp_path / "run") == 0

    def test_fit_from_labeled_samples(self, single, tmp_path):
        dim = read_detections(str(single / "detections.jsonl"))["single"][0][0].motion_hist.dim
        rng = np.random.default_rng(0)
        positives = [FeatureHistogram(rng.dirichlet(np.ones(dim))) for _ in range(8)]
        negatives = [FeatureHistogram(rng.dirichlet(np.ones(dim))) for _ in range(8)]
        samples = tmp_path / "samples.jsonl"
        write_motion_samples(positives, negatives, str(samples), actions=["walk", "run"] * 4)
        gmm = tmp_path / "gmm.json"
        assert cli("score", "--detections", single / "detections.jsonl", "--fit", samples,
                   "--save-gmm", gmm, "-o", tmp_path / "scored") == 0
        document = json.loads(gmm.read_text(encoding="utf-8"))
        assert len(document["positive"]["components"]) == 2
        assert len(document["negative"]["components"]) == 2


class TestStages:
    def test_stage_by_stage_matches_run(self, single, tmp_path):
        scenario = single / "scenarios" / "single.json"
        stages = tmp_path / "stages"
        assert cli("score", "--detections", single / "detections.jsonl", "-o", stages) == 0
        scored = stages / "scored_detections.jsonl"
        assert cli("search", "--detections", scored, "-o", stages) == 0
        assert cli("associate", "--detections", scored, "--paths", stages / "paths.jsonl", "-o", stages) == 0
        assert cli("complete", "--detections", scored, "--paths", stages / "paths.jsonl",
                   "--path-sets", stages / "path_sets.jsonl", "--scenario", scenario, "-o", stages) == 0
        assert cli("emit", "--tracks", stages / "tracks.jsonl", "-o", stages) == 0
        assert cli("evaluate", "--proposals", stages / "proposals.jsonl",
                   "--ground-truth", single / "ground_truth.jsonl", "-o", stages) == 0

        run = tmp_path / "run"
        assert cli("run", "--detections", single / "detections.jsonl",
                   "--scenario", scenario, "-o", run) == 0
        assert (stages / "proposals.jsonl").read_bytes() == (run / "proposals.jsonl").read_bytes()
        assert json.loads((stages / "metrics.json").read_text())["recall"] == 1.0


class TestExitCodes:
    def test_help(self, capsys):
        assert cli("--help") == 0
        assert "generate" in capsys.readouterr().out

    def test_unknown_command(self):
        assert cli("frobnicate") == 1

    def test_missing_required_argument(self):
        assert cli("search") == 1

    def test_missing_input_file(self, tmp_path, capsys):
        assert cli("search", "--detections", tmp_path / "nope.jsonl", "-o", tmp_path) == 1
        assert "action-proposals: error: file not found" in capsys.readouterr().err

    def test_malformed_detections(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"video": "v", "frame": 0}\n', encoding="utf-8")
        assert cli("run", "--detections", bad, "-o", tmp_path) == 1
        assert "bad.jsonl:1" in capsys.readouterr().err

    def test_mistyped_detection_field(self, single, tmp_path, capsys):
        lines = (single / "detections.jsonl").read_text(encoding="utf-8").splitlines()
        record = json.loads(lines[0])
        record["shift_dx"] = "abc"
        bad = tmp_path / "d.jsonl"
        bad.write_text(json.dumps(record) + "\n", encoding="utf-8")
        assert cli("search", "--detections", bad, "-o", tmp_path) == 1
        err = capsys.readouterr().err
        assert "d.jsonl:1" in err and "shift_dx" in err
        assert "CRITICAL ERROR" not in err

    def test_bad_override(self, tmp_path):
        assert cli("run", "--detections", tmp_path / "x.jsonl", "--set", "search.pool_size=0") == 1

    def test_mistyped_override(self, tmp_path, capsys):
        assert cli("run", "--detections", tmp_path / "x.jsonl", "--set", "search.pool_size=abc") == 1
        assert "search.pool_size expects an integer" in capsys.readouterr().err

    def test_unknown_profile(self, tmp_path):
        assert cli("generate", "--profile", "kinetics", "-o", tmp_path) == 1

    def test_fit_needs_ground_truth(self, single, tmp_path):
        assert cli("run", "--detections", single / "detections.jsonl", "--fit-gt", "-o", tmp_path) == 1

    def test_save_gmm_needs_a_fit(self, single, tmp_path):
        assert cli("score", "--detections", single / "detections.jsonl",
                   "--save-gmm", tmp_path / "gmm.json", "-o", tmp_path) == 1
