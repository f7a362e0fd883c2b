import logging
from typing import Callable

from secnet.common.errors import DataError
from secnet.modules.autodiff.adam import adam_step
from secnet.modules.autodiff.autodiff_types import AdamState
from secnet.modules.autodiff.ops import scale
from secnet.modules.autodiff.params import Params
from secnet.modules.datapipe.datapipe_types import Clip, TrainingPair
from secnet.modules.datapipe.datapipe_utils import augment_batch, make_rng
from secnet.modules.trainer.trainer_types import InitialEstimate, LossBreakdown, ModelConfig, Phase, TrainerState
from secnet.modules.trainer.trainer_utils import clip_forward, mean_breakdown

StepCallback = Callable[[int, Phase, LossBreakdown], None]


def train_step(
    clips: list[Clip], params: Params, adam: AdamState, cfg: ModelConfig, phase: Phase = Phase.JOINT
) -> LossBreakdown:
    """
    One Adam update from a batch of independent clips. Every clip starts from empty recurrent
    buffers and contributes 1/B of the gradient. A loss that no trainable parameter feeds (a
    cubic initial estimate with T1 = 0 during pretraining) is reported without an update.
    """
    if not clips:
        raise DataError("Cannot take a training step on an empty batch")

    params.zero_grad()
    breakdowns = []
    for clip in clips:
        total, breakdown = clip_forward(clip.lr, clip.hr, params, cfg, phase)
        share = scale(total, 1.0 / len(clips))
        if share.requires_grad:
            share.backward()
        breakdowns.append(breakdown)
    if any(tensor.grad is not None for _, tensor in params.items()):
        adam_step(params, adam, cfg.lr)
    return mean_breakdown(breakdowns)


def run_steps(
    phase: Phase,
    steps: int,
    dataset: list[TrainingPair],
    params: Params,
    adam: AdamState,
    cfg: ModelConfig,
    state: TrainerState,
    logger: logging.Logger,
    on_step: StepCallback | None = None,
) -> TrainerState:
    """Draw a fresh batch per step from a stream seeded by (seed, step), so resumed runs see the same data."""
    augment = cfg.augment_config()
    for _ in range(steps):
        clips = augment_batch(dataset, augment, make_rng(cfg.seed, 0, state.step), cfg.batch_size)
        breakdown = train_step(clips, params, adam, cfg, phase)
        state.step += 1
        state.history.append(breakdown)

        if state.step % cfg.log_period == 0:
            logger.info(
                f"Step {state.step} ({phase}): loss {breakdown.loss:.6f} "
                f"[L_e {breakdown.loss_e:.6f}, L_l {breakdown.loss_l:.6f}, L_f {breakdown.loss_f:.6f}]"
            )
        if on_step is not None:
            on_step(state.step, phase, breakdown)
    return state


def pretrain_lffn(
    dataset: list[TrainingPair],
    params: Params,
    adam: AdamState,
    cfg: ModelConfig,
    steps: int,
    state: TrainerState,
    logger: logging.Logger,
    on_step: StepCallback | None = None,
) -> Params:
    """Optimize L_l + gamma * L_f for `steps` steps; the refinement network is never run."""
    logger.info(f"Pretraining the initial estimate for {steps} steps")
    if steps and cfg.initial_estimate == InitialEstimate.CUBIC and cfg.t1 == 0:
        logger.warning("Cubic initial estimate without neighbours has no weights to pretrain")
    run_steps(Phase.PRETRAIN, steps, dataset, params, adam, cfg, state, logger, on_step)
    return params
