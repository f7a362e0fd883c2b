import pytest

from secnet.common.config import build_model
from secnet.common.errors import ConfigError
from secnet.modules.sfe.sfe_types import SfeStrategy
from secnet.modules.trainer.trainer_types import ModelConfig, Phase, TrainerState


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert (cfg.t1, cfg.t2, cfg.t3, cfg.n_frames) == (2, 2, 6, 8)
        assert (cfg.alpha, cfg.gamma, cfg.scale) == (0.01, 0.1, 4)
        assert cfg.sfe == SfeStrategy.FUSED
        assert cfg.validation_period == 200

    def test_toy_profile(self):
        cfg = ModelConfig.for_profile("toy")
        assert cfg.lr_size == 16
        assert cfg.augment_config().crop_size == 64
        assert cfg.n_res_blocks == 2

    def test_full_profile_with_override(self):
        cfg = ModelConfig.for_profile("full", n_res_blocks=4)
        assert cfg.n_res_blocks == 4
        assert cfg.erff_widths == [64, 128, 256]

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            ModelConfig.for_profile("huge")

    @pytest.mark.parametrize("key,value", [("scale", 3), ("t1", -1), ("n_frames", 0), ("gamma", -0.1)])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError) as e:
            build_model(ModelConfig, **{key: value})
        assert e.value.key == key

    def test_bad_flow_widths(self):
        with pytest.raises(ConfigError):
            build_model(ModelConfig, flow_widths=[8, 3])

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as e:
            build_model(ModelConfig, widths=[1])
        assert e.value.key == "widths"

    def test_t2_larger_than_t1_is_allowed(self):
        assert build_model(ModelConfig, t1=1, t2=3).t2 == 3

    def test_fused_frames_follow_rff(self):
        assert ModelConfig(rff=False).fused_frames == 0
        assert ModelConfig(rff=False).erff_config().in_channels == 3
        assert ModelConfig(t2=3).erff_config().in_channels == 12

    def test_phase_schedule(self):
        cfg = ModelConfig(pretrain_steps=3, joint_steps=2)
        assert [cfg.phase_at(step) for step in range(5)] == [Phase.PRETRAIN] * 3 + [Phase.JOINT] * 2
        assert cfg.total_steps == 5


class TestTrainerState:
    def test_first_validation_is_recorded(self, tmp_path):
        state = TrainerState()
        assert state.record_validation(12.0, tmp_path / "a")
        assert state.best_metric == 12.0

    def test_worse_or_equal_keeps_best(self, tmp_path):
        state = TrainerState()
        state.record_validation(12.0, tmp_path / "a")
        assert not state.record_validation(11.0, tmp_path / "b")
        assert not state.record_validation(12.0, tmp_path / "c")
        assert state.best_checkpoint == tmp_path / "a"

    def test_best_is_monotone(self, tmp_path):
        state = TrainerState()
        best = []
        for index, metric in enumerate([10.0, 9.0, 13.0, 12.5, 14.0]):
            state.record_validation(metric, tmp_path / str(index))
            best.append(state.best_metric)
        assert best == sorted(best)
