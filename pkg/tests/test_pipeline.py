import pytest

from action_proposals.core.config import PipelineConfig, load_config
from action_proposals.core.errors import InputError, StageError
from action_proposals.core.evaluation import recall_at, track_iou
from action_proposals.core.pipeline import STAGES, ProposalPipeline, run_pipeline, video_seed, write_outputs
from action_proposals.core.synthetic import generate_scenario, single_actor, two_actor_crossing


def scenarios(*specs):
    generated = [generate_scenario(spec) for spec in specs]
    detections = {s.video: s.frames for s in generated}
    ground_truth = {s.video: s.ground_truth for s in generated}
    appearance = {s.video: s.appearance for s in generated}
    return detections, ground_truth, appearance


class TestSingleActor:
    def test_noiseless_actor_gives_one_exact_proposal(self):
        detections, ground_truth, appearance = scenarios(single_actor(seed=2))
        result = run_pipeline(detections, ground_truth=ground_truth, appearance=appearance)
        (proposal,) = result.proposals
        assert proposal.completed_count == 0
        assert track_iou(ground_truth["single"][0], proposal) == pytest.approx(1.0, abs=1e-12)
        assert result.report.recall == 1.0
        assert set(result.timings) == set(STAGES)

    def test_gap_is_completed(self):
        detections, ground_truth, appearance = scenarios(single_actor(seed=2, gap=5))
        result = run_pipeline(detections, ground_truth=ground_truth, appearance=appearance)
        (proposal,) = result.proposals
        assert proposal.frames == list(range(60))
        assert proposal.completed_count == 5
        assert result.report.recall == 1.0


class TestEmptyInput:
    def test_no_videos(self):
        result = run_pipeline({})
        assert result.proposals == []
        assert result.videos == []

    def test_video_without_detections(self):
        result = run_pipeline({"v": [[], [], []]})
        assert [v.video for v in result.videos] == ["v"]
        assert result.proposals == []
        assert result.tracks == []


class TestTwoActorCrossing:
    def test_both_actors_recovered(self):
        successes = 0
        for seed in range(20):
            detections, ground_truth, appearance = scenarios(two_actor_crossing(seed=seed))
            result = run_pipeline(detections, ground_truth=ground_truth, appearance=appearance)
            proposals = result.proposals_by_video
            if recall_at(proposals, ground_truth, 0.5) == 1.0 and len(result.proposals) <= 12:
                successes += 1
        assert successes >= 18

    def test_path_sets_respect_constraints(self):
        detections, _, appearance = scenarios(two_actor_crossing(seed=3))
        result = run_pipeline(detections, appearance=appearance)
        config = PipelineConfig()
        for path_set in result.videos[0].path_sets:
            assert len(path_set) <= config.association.max_paths
            path_set.check_constraints()


class TestDeterminism:
    def test_outputs_byte_identical(self, tmp_path):
        written = []
        for run in ("a", "b"):
            detections, ground_truth, appearance = scenarios(two_actor_crossing(seed=1, n_frames=60))
            result = run_pipeline(detections, ground_truth=ground_truth, appearance=appearance)
            written.append(write_outputs(result, str(tmp_path / run)))
        first, second = written
        assert set(first) == {"proposals", "tracks", "metrics_json", "metrics_csv", "metrics_curve"}
        for name in first:
            assert first[name].read_bytes() == second[name].read_bytes()

    def test_workers_keep_video_order(self):
        specs = [two_actor_crossing(seed=k, n_frames=40, video=f"clip-{k}") for k in (2, 0, 1)]
        serial = run_pipeline(scenarios(*specs)[0])
        parallel = run_pipeline(scenarios(*specs)[0], load_config(overrides=["workers=3"]))
        assert [v.video for v in parallel.videos] == ["clip-0", "clip-1", "clip-2"]
        assert [(p.video, p.frames, p.score) for p in parallel.proposals] == \
            [(p.video, p.frames, p.score) for p in serial.proposals]

    def test_video_seed_independent_of_order(self):
        assert video_seed(0, "clip-1") == video_seed(0, "clip-1")
        assert video_seed(0, "clip-1") != video_seed(0, "clip-2")
        assert video_seed(0, "clip-1") != video_seed(1, "clip-1")


class TestMotionScoring:
    def test_fit_from_ground_truth(self):
        detections, ground_truth, _ = scenarios(two_actor_crossing(seed=0, n_frames=40))
        result = ProposalPipeline().run(detections, ground_truth, fit_motion=True)
        gp, gn = result.gmm
        assert gp.n_components == 2
        assert all(0.0 <= d.actionness for frame in detections["crossing"] for d in frame)

    def test_fit_needs_ground_truth(self):
        with pytest.raises(InputError, match="ground truth"):
            ProposalPipeline().run({"v": [[]]}, fit_motion=True)

    def test_existing_scores_kept_without_mixtures(self, make_detection):
        frames = [[make_detection(t, actionness=0.25)] for t in range(3)]
        ProposalPipeline().score("v", frames)
        assert [f[0].actionness for f in frames] == [0.25, 0.25, 0.25]

    def test_stored_scores_out_of_range_rejected(self, make_detection):
        frames = [[make_detection(0, actionness=0.5)], [make_detection(1, actionness=2.5)]]
        with pytest.raises(StageError) as info:
            run_pipeline({"v": frames})
        assert info.value.stage == "score"
        assert info.value.exit_code == 1
        assert "outside [0, 2.0]" in str(info.value)

    def test_human_only_scores(self, make_detection):
        frames = [[make_detection(t, human_score=0.7)] for t in range(3)]
        ProposalPipeline().score("v", frames)
        assert [f[0].actionness for f in frames] == [0.7, 0.7, 0.7]


class TestStageErrors:
    def test_failure_names_stage_and_video(self, make_detection):
        frames = [[make_detection(1, actionness=0.5)]]
        with pytest.raises(StageError) as info:
            run_pipeline({"bad": frames})
        assert info.value.stage == "search"
        assert info.value.video == "bad"
        assert info.value.exit_code == 1
        assert "stage 'search' failed (video 'bad')" in str(info.value)


class TestProgress:
    def test_callback_reaches_100(self):
        detections, _, _ = scenarios(single_actor(seed=0))
        messages = []
        pipeline = ProposalPipeline()
        pipeline.set_progress_callback(lambda message, percent: messages.append((message, percent)))
        pipeline.run(detections)
        assert messages[0][0].startswith("Processing 1 videos")
        assert messages[-1] == ("single: 1 proposals", 100)
