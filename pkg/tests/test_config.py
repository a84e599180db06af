import pytest

from action_proposals.core.config import (PipelineConfig, load_config, load_config_file, merge_config,
                                          parse_override)
from action_proposals.core.errors import InputError
from action_proposals.core.profiles import (PIPELINE_PROFILES, ProfileType, find_profile, get_all_profiles,
                                            get_profile)


class TestDefaults:
    def test_documented_values(self):
        config = PipelineConfig().validate()
        assert config.scoring.lambda_p == 1.0
        assert config.search.pool_size == 50
        assert (config.link.eta_o, config.link.eta_f) == (0.3, 0.5)
        assert config.association.max_paths == 12
        assert config.association.eta_p == 0.3
        assert config.proposals.min_duration == 20
        assert config.completion.scales == (0.8, 0.9, 1.0, 1.1, 1.2)
        assert config.evaluation.eta == 0.5


class TestOverrides:
    def test_parse(self):
        assert parse_override("search.link.eta_o=0.4") == {"search": {"link": {"eta_o": 0.4}}}
        assert parse_override("seed=7") == {"seed": 7}
        assert parse_override("evaluation.recall_thresholds=[0.5,0.7]") == {
            "evaluation": {"recall_thresholds": [0.5, 0.7]}}

    def test_parse_rejects_bad_text(self):
        with pytest.raises(InputError):
            parse_override("search.pool_size")
        with pytest.raises(InputError):
            parse_override("=3")

    def test_types_coerced(self):
        config = load_config(overrides=["scoring.lambda_p=2", "search.pool_size=80.0",
                                        "evaluation.recall_thresholds=[0.5,0.7]"])
        assert config.scoring.lambda_p == 2.0 and isinstance(config.scoring.lambda_p, float)
        assert config.search.pool_size == 80 and isinstance(config.search.pool_size, int)
        assert config.evaluation.recall_thresholds == (0.5, 0.7)

    @pytest.mark.parametrize("override,message", [
        ("search.pool_size=abc", "search.pool_size expects an integer"),
        ("search.pool_size=2.5", "search.pool_size expects an integer"),
        ("scoring.lambda_p=high", "scoring.lambda_p expects a number"),
        ("completion.scales=[1.0,\"big\"]", "completion.scales expects a list of numbers"),
        ("evaluation.recall_thresholds=0.5", "recall_thresholds expects a list"),
        ("gmm.components=two", "gmm.components expects an integer"),
        ("completion.frame_width=[320]", "completion.frame_width expects a number"),
        ("lambda_a=x", "lambda_a expects a number"),
        ("linking=3", "must be tables"),
    ])
    def test_wrong_types_rejected(self, override, message):
        with pytest.raises(InputError, match=message):
            load_config(overrides=[override])

    def test_optional_fields_accept_values(self):
        config = load_config(overrides=["gmm.components=3", "completion.frame_width=320"])
        assert config.gmm.components == 3
        assert config.completion.frame_width == 320.0 and isinstance(config.completion.frame_width, float)

    def test_unknown_key(self):
        with pytest.raises(InputError, match="search.pool"):
            load_config(overrides=["search.pool=3"])

    def test_boolean_must_be_boolean(self):
        with pytest.raises(InputError, match="boolean"):
            load_config(overrides=["proposals.strict=1"])

    def test_shared_lambda_a(self):
        config = merge_config(PipelineConfig(), {"lambda_a": 0.5})
        assert config.link.lambda_a == 0.5
        assert config.association.lambda_a == 0.5

    def test_linking_alias(self):
        config = PipelineConfig.from_dict({"linking": {"eta_o": 0.2}, "search": {"pool_size": 60}})
        assert config.link.eta_o == 0.2
        assert config.search.pool_size == 60

    def test_seed(self):
        assert load_config(seed=11).seed == 11


class TestConfigFiles:
    def test_toml(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("seed = 3\n\n[association]\nmax_paths = 8\nuse_similarity = false\n", encoding="utf-8")
        config = load_config(str(path), overrides=["seed=4"])
        assert config.association.max_paths == 8
        assert config.association.use_similarity is False
        assert config.seed == 4

    def test_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"proposals": {"min_duration": 15, "strict": true}}', encoding="utf-8")
        config = load_config(str(path))
        assert config.proposals.min_duration == 15
        assert config.proposals.strict is True

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_config_file(str(tmp_path / "nope.toml"))

    def test_unparsable(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("seed = = 3\n", encoding="utf-8")
        with pytest.raises(InputError, match="cannot parse"):
            load_config(str(path))


class TestValidation:
    @pytest.mark.parametrize("override,message", [
        ("search.link.eta_o=1.5", "eta_o"),
        ("association.eta_p=-0.1", "eta_p"),
        ("association.max_paths=60", "must not exceed"),
        ("proposals.min_duration=0", "min_duration"),
        ("completion.search_scale=0.5", "search_scale"),
        ("completion.scales=[]", "scales"),
        ("workers=0", "workers"),
        ("scoring.lambda_p=-1", "lambda_p"),
    ])
    def test_out_of_range(self, override, message):
        with pytest.raises(InputError, match=message):
            load_config(overrides=[override])

    def test_all_problems_reported(self):
        with pytest.raises(InputError) as info:
            load_config(overrides=["workers=0", "evaluation.eta=2"])
        assert "workers" in str(info.value) and "evaluation.eta" in str(info.value)


class TestProfiles:
    def test_lookup(self):
        assert find_profile("ucf-101").id is ProfileType.UCF_101
        assert find_profile("HUMAN_ONLY").id is ProfileType.HUMAN_ONLY
        assert get_profile(ProfileType.UCF_SPORTS) is PIPELINE_PROFILES[ProfileType.UCF_SPORTS]
        assert len(get_all_profiles()) == len(ProfileType)

    def test_unknown(self):
        with pytest.raises(InputError, match="available"):
            find_profile("kinetics")

    def test_apply(self):
        config = find_profile("ucf-101").apply_to_config()
        assert config.search.pool_size == 100
        assert config.association.max_paths == 18
        assert find_profile("human-only").apply_to_config().scoring.lambda_p == 0.0
        assert find_profile("coverage-only").apply_to_config().association.use_similarity is False

    def test_overrides_apply_on_top_of_profile(self):
        base = find_profile("ucf-101").apply_to_config()
        config = load_config(overrides=["association.max_paths=10"], base=base)
        assert config.search.pool_size == 100
        assert config.association.max_paths == 10

    def test_every_profile_validates(self):
        for profile in get_all_profiles():
            profile.apply_to_config().validate()
