import csv
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from secnet.common.config import build_model
from secnet.common.constants import TRAIN_LOG_HEADER
from secnet.modules.autodiff.autodiff_types import AdamState
from secnet.modules.autodiff.params import Params
from secnet.modules.autodiff.tensor_file import load_checkpoint, save_checkpoint
from secnet.modules.datapipe.datapipe_types import TrainingPair
from secnet.modules.datapipe.datapipe_utils import make_training_pair
from secnet.modules.datapipe.frame_io import read_sequence, sequence_dirs
from secnet.modules.sfe.sfe_types import SfeStrategy
from secnet.modules.trainer.train_step import pretrain_lffn, run_steps
from secnet.modules.trainer.trainer_types import AblationRow, LossBreakdown, ModelConfig, Phase, TrainerState
from secnet.modules.trainer.trainer_utils import dump_config_file, init_model_params
from secnet.modules.trainer.validate import validate_and_checkpoint, validation_psnr

TRAIN_LOG = "train_log.csv"
CONFIG_FILE = "config.txt"
LAST_CHECKPOINT = "checkpoint_last"
ABLATION_CSV = "ablation.csv"


def load_pairs(source: Path, cfg: ModelConfig, workers: int = 1) -> list[TrainingPair]:
    """Read HR sequences and degrade each into its LR counterpart."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        sequences = list(pool.map(read_sequence, sequence_dirs(source)))
    degrade = cfg.degrade_config()
    return [make_training_pair(hr, degrade) for hr in sequences]


def _truncate_log(path: Path, step: int) -> None:
    """Drop rows logged after `step`."""
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    kept = rows[:1] + [row for row in rows[1:] if row and int(row[0]) <= step]
    with path.open("w", newline="") as handle:
        csv.writer(handle).writerows(kept)


def _start(cfg: ModelConfig, resume: Path | None, logger: logging.Logger) -> tuple[Params, AdamState, TrainerState]:
    state = TrainerState(pretrain_steps=cfg.pretrain_steps, joint_steps=cfg.joint_steps)
    if resume is None:
        return init_model_params(cfg, np.random.default_rng(cfg.seed)), AdamState(), state

    params, adam, manifest = load_checkpoint(resume)
    state.step = manifest.step
    if manifest.best_metric is not None:
        state.best_metric = manifest.best_metric
        state.best_checkpoint = resume
    logger.info(f"Resuming from {resume} at step {state.step}")
    return params, adam, state


def train_model(
    cfg: ModelConfig,
    dataset: list[TrainingPair],
    validation: list[TrainingPair],
    out_dir: Path,
    logger: logging.Logger,
    resume: Path | None = None,
) -> tuple[Params, TrainerState]:
    """
    Pretrain the initial estimate, then train the whole network jointly, for the step budgets in
    `cfg`. Every step is appended to the CSV training log; with a validation set the model is
    scored every `validation_period` steps and checkpointed when it improves. The final weights
    always land in `checkpoint_last`.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    params, adam, state = _start(cfg, resume, logger)
    dump_config_file(cfg, out_dir / CONFIG_FILE)

    log_path = out_dir / TRAIN_LOG
    fresh_log = resume is None or not log_path.is_file()
    if not fresh_log:
        _truncate_log(log_path, state.step)
    with log_path.open("w" if fresh_log else "a", newline="") as handle:
        writer = csv.writer(handle)
        if fresh_log:
            writer.writerow(TRAIN_LOG_HEADER)

        def on_step(step: int, phase: Phase, breakdown: LossBreakdown) -> None:
            writer.writerow([step, phase, breakdown.loss, breakdown.loss_e, breakdown.loss_l, breakdown.loss_f, cfg.lr])
            if validation and step % cfg.validation_period == 0:
                validate_and_checkpoint(params, adam, validation, state, cfg, out_dir, logger)

        pretrain_lffn(dataset, params, adam, cfg, max(cfg.pretrain_steps - state.step, 0), state, logger, on_step)
        joint = max(cfg.total_steps - state.step, 0)
        logger.info(f"Joint training for {joint} steps")
        run_steps(Phase.JOINT, joint, dataset, params, adam, cfg, state, logger, on_step)

    save_checkpoint(
        out_dir / LAST_CHECKPOINT,
        params,
        adam,
        step=state.step,
        config=cfg.model_dump(mode="json"),
        best_metric=state.best_metric,
    )
    logger.info(f"Finished at step {state.step}; best validation PSNR {state.best_metric}")
    return params, state


# ── Ablations ─────────────────────────────────────────────────────────────────


def _label(value: object) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    return str(value)


def ablation_grid(base: ModelConfig, axes: dict[str, list] | None = None) -> list[tuple[str, ModelConfig]]:
    """
    Every combination of the given field values on top of `base`, named after its settings.
    Defaults to recurrent fusion on/off crossed with the four sfe strategies.
    """
    axes = axes or {"rff": [True, False], "sfe": list(SfeStrategy)}
    variants = []
    for combination in itertools.product(*axes.values()):
        overrides = dict(zip(axes, combination))
        name = "_".join(f"{key}-{_label(value)}" for key, value in overrides.items())
        variants.append((name, build_model(ModelConfig, **{**base.model_dump(), **overrides})))
    return variants


def run_ablation(
    grid: list[tuple[str, ModelConfig]],
    dataset: list[TrainingPair],
    validation: list[TrainingPair],
    out_dir: Path,
    logger: logging.Logger,
) -> list[AblationRow]:
    """Train every variant on the same data and score it on the validation set (or the training set without one)."""
    rows = []
    for name, cfg in grid:
        logger.info(f"Ablation variant {name}")
        params, state = train_model(cfg, dataset, validation, out_dir / name, logger)
        rows.append(
            AblationRow(
                name=name,
                rff=cfg.rff,
                sfe=cfg.sfe,
                attention=cfg.attention,
                t2=cfg.t2,
                t3=cfg.t3,
                n_res_blocks=cfg.n_res_blocks,
                final_loss=state.history[-1].loss if state.history else float("nan"),
                psnr=validation_psnr(params, validation or dataset, cfg),
            )
        )
    write_ablation(rows, out_dir / ABLATION_CSV)
    return rows


def write_ablation(rows: list[AblationRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(AblationRow.model_fields))
        for row in rows:
            writer.writerow(list(row.model_dump(mode="json").values()))
    return path
