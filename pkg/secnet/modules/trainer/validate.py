import logging
from pathlib import Path

import numpy as np

from secnet.common.errors import DataError
from secnet.modules.autodiff.autodiff_types import AdamState
from secnet.modules.autodiff.params import Params
from secnet.modules.autodiff.tensor_file import save_checkpoint
from secnet.modules.datapipe.datapipe_types import TrainingPair
from secnet.modules.metrics.metrics_utils import psnr
from secnet.modules.trainer.infer_sequence import infer_sequence
from secnet.modules.trainer.trainer_types import ModelConfig, TrainerState


def validation_psnr(params: Params, validation: list[TrainingPair], cfg: ModelConfig) -> float:
    """Mean over sequences of the PSNR between the super-resolved LR sequence and its ground truth."""
    if not validation:
        raise DataError("The validation set is empty")
    scores = [psnr(infer_sequence(pair.lr, params, cfg).frames, pair.hr.frames) for pair in validation]
    return float(np.mean(scores))


def checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:06d}"


def validate_and_checkpoint(
    params: Params,
    adam: AdamState,
    validation: list[TrainingPair],
    state: TrainerState,
    cfg: ModelConfig,
    out_dir: Path,
    logger: logging.Logger,
) -> TrainerState:
    """
    Score the current parameters on the validation set and write a checkpoint only when the mean
    PSNR beats every earlier validation.
    """
    metric = validation_psnr(params, validation, cfg)
    checkpoint = out_dir / checkpoint_name(state.step)

    if not state.record_validation(metric, checkpoint):
        logger.info(f"Step {state.step}: validation PSNR {metric:.3f} dB, best stays {state.best_metric:.3f} dB")
        return state

    save_checkpoint(
        checkpoint,
        params,
        adam,
        step=state.step,
        config=cfg.model_dump(mode="json"),
        best_metric=metric,
    )
    logger.info(f"Step {state.step}: validation PSNR {metric:.3f} dB improved, saved {checkpoint}")
    return state
