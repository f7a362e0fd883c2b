from unittest.mock import MagicMock

import numpy as np
import pytest

from secnet.common.errors import DataError
from secnet.modules.autodiff.autodiff_types import AdamState
from secnet.modules.datapipe.datapipe_types import Clip
from secnet.modules.trainer.train_step import pretrain_lffn, run_steps, train_step
from secnet.modules.trainer.trainer_types import InitialEstimate, Phase, TrainerState
from secnet.modules.trainer.trainer_utils import grad_check_config, init_model_params


def _clips(micro_clip, count: int = 1) -> list[Clip]:
    lr, hr = micro_clip
    return [Clip(lr=lr, hr=hr) for _ in range(count)]


class TestTrainStep:
    def test_loss_decreases_on_repeated_clip(self, micro_cfg, micro_params, micro_clip):
        adam = AdamState()
        clips = _clips(micro_clip)
        losses = [train_step(clips, micro_params, adam, micro_cfg).loss for _ in range(15)]
        assert losses[-1] < losses[0]
        assert adam.step == 15

    def test_batch_is_mean_over_clips(self, micro_cfg, micro_clip):
        single = init_model_params(micro_cfg, np.random.default_rng(0))
        double = init_model_params(micro_cfg, np.random.default_rng(0))
        a = train_step(_clips(micro_clip, 1), single, AdamState(), micro_cfg)
        b = train_step(_clips(micro_clip, 2), double, AdamState(), micro_cfg)
        assert a.loss == pytest.approx(b.loss, abs=1e-15)
        for name, tensor in single.items():
            np.testing.assert_allclose(tensor.data, double[name].data, rtol=1e-9, atol=1e-12)

    def test_empty_batch(self, micro_cfg, micro_params):
        with pytest.raises(DataError):
            train_step([], micro_params, AdamState(), micro_cfg)

    def test_zero_gamma_keeps_flow_weights(self, micro_clip):
        cfg = grad_check_config(gamma=0.0)
        params = init_model_params(cfg, np.random.default_rng(1))
        params["flow.conv.1.w"].data[...] = 0.05
        before = params.scope("flow").snapshot()
        adam = AdamState()
        for _ in range(5):
            train_step(_clips(micro_clip), params, adam, cfg)
        for name, values in before.items():
            np.testing.assert_array_equal(params[name].data, values)


class TestPretrainLffn:
    def test_refinement_untouched_and_steps_honored(self, micro_cfg, micro_params, micro_pairs):
        untouched = {**micro_params.scope("erff").snapshot(), **micro_params.scope("sfe").snapshot()}
        lffn_before = micro_params.scope("lffn").snapshot()
        state = TrainerState()
        adam = AdamState()

        pretrain_lffn(micro_pairs, micro_params, adam, micro_cfg, 3, state, MagicMock())

        assert state.step == 3 and adam.step == 3
        assert [b.loss_e for b in state.history] == [0.0, 0.0, 0.0]
        for name, values in untouched.items():
            np.testing.assert_array_equal(micro_params[name].data, values)
        assert any(not np.array_equal(micro_params[name].data, values) for name, values in lffn_before.items())

    def test_cubic_estimate_without_neighbours_takes_no_update(self, micro_pairs):
        cfg = grad_check_config(t1=0, initial_estimate=InitialEstimate.CUBIC, lr=1e-3)
        params = init_model_params(cfg, np.random.default_rng(0))
        before = params.snapshot()
        state = TrainerState()
        adam = AdamState()
        logger = MagicMock()

        pretrain_lffn(micro_pairs, params, adam, cfg, 2, state, logger)

        assert state.step == 2 and adam.step == 0
        assert all(b.loss > 0.0 for b in state.history)
        logger.warning.assert_called_once()
        for name, values in before.items():
            np.testing.assert_array_equal(params[name].data, values)


class TestRunSteps:
    def test_same_seed_same_trajectory(self, micro_cfg, micro_pairs):
        trajectories = []
        for _ in range(2):
            params = init_model_params(micro_cfg, np.random.default_rng(micro_cfg.seed))
            state = TrainerState()
            run_steps(Phase.JOINT, 3, micro_pairs, params, AdamState(), micro_cfg, state, MagicMock())
            trajectories.append([b.loss for b in state.history])
        assert trajectories[0] == trajectories[1]

    def test_logs_every_log_period(self, micro_cfg, micro_pairs, micro_params):
        logger = MagicMock()
        callback = MagicMock()
        run_steps(Phase.JOINT, 2, micro_pairs, micro_params, AdamState(), micro_cfg, TrainerState(), logger, callback)
        assert logger.info.call_count == 2
        assert [c.args[0] for c in callback.call_args_list] == [1, 2]
        assert callback.call_args_list[0].args[1] == Phase.JOINT
