import numpy as np
import pytest

from secnet.modules.datapipe.datapipe_types import SynthSceneConfig
from secnet.modules.datapipe.datapipe_utils import make_training_pair, synth_sequence
from secnet.modules.trainer.trainer_utils import grad_check_config, init_model_params


@pytest.fixture
def micro_cfg():
    """4x4 -> 16x16 network with every module switched on."""
    return grad_check_config(lr=1e-3, pretrain_steps=2, joint_steps=2, validation_period=2, log_period=1)


@pytest.fixture
def micro_params(micro_cfg):
    return init_model_params(micro_cfg, np.random.default_rng(0))


@pytest.fixture
def micro_pairs(micro_cfg):
    scene = SynthSceneConfig(size=16, length=6, amplitude=1.0)
    pairs = []
    for seed in (1, 2):
        hr, _ = synth_sequence(scene, seed=seed, name=f"scene{seed}__blob")
        pairs.append(make_training_pair(hr, micro_cfg.degrade_config()))
    return pairs


@pytest.fixture
def micro_clip(micro_cfg):
    rng = np.random.default_rng(4)
    size = micro_cfg.lr_size
    lr = rng.uniform(size=(micro_cfg.n_frames, micro_cfg.channels, size, size))
    hr = rng.uniform(size=(micro_cfg.n_frames, micro_cfg.channels, 4 * size, 4 * size))
    return lr, hr
