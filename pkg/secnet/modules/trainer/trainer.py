from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.table import Table

from secnet.common.config import build_model
from secnet.common.environment import load_environment
from secnet.common.errors import EXIT_RUNTIME, ConfigError
from secnet.common.logger import get_logger
from secnet.modules.autodiff.grad_check import primitive_suite
from secnet.modules.autodiff.tensor_file import load_checkpoint
from secnet.modules.datapipe.frame_io import read_sequence, sequence_dirs, sequence_format, write_sequence
from secnet.modules.trainer.infer_sequence import infer_sequence
from secnet.modules.trainer.train_model import ablation_grid, load_pairs, run_ablation, train_model
from secnet.modules.trainer.trainer_types import ModelConfig
from secnet.modules.trainer.trainer_utils import config_from_manifest, load_config_file, model_grad_check

router = typer.Typer()


@router.command("train")
def run_train(
    config: Annotated[Path, typer.Option(help="key=value file setting any model, schedule or data field")],
    profile: Annotated[str | None, typer.Option(help="Defaults the config file overrides: toy or full")] = None,
    seed: Annotated[int | None, typer.Option(help="Overrides the seed of the config file")] = None,
    workers: Annotated[int | None, typer.Option(min=1, help="Parallel sequence reads, defaults to SECN_WORKERS")] = None,
    out: Annotated[Path, typer.Option(help="Run directory for the log, config and checkpoints")] = Path("runs/secn"),
    resume: Annotated[Path | None, typer.Option(help="Checkpoint directory to continue from")] = None,
    ablation: Annotated[bool, typer.Option(help="Train the rff x sfe grid instead of a single model")] = False,
) -> None:
    """
    Pretrain the initial estimate, then train the full network jointly.
    """
    logger = get_logger()
    cfg = load_config_file(config, profile)
    if seed is not None:
        cfg = build_model(ModelConfig, **{**cfg.model_dump(), "seed": seed})
    if cfg.train_data is None:
        raise ConfigError("train_data")

    workers = workers or load_environment().WORKERS
    dataset = load_pairs(cfg.train_data, cfg, workers)
    validation = load_pairs(cfg.val_data, cfg, workers) if cfg.val_data is not None else []
    logger.info(f"Training on {len(dataset)} sequences, validating on {len(validation)}")

    if not ablation:
        train_model(cfg, dataset, validation, out, logger, resume=resume)
        return

    rows = run_ablation(ablation_grid(cfg), dataset, validation, out, logger)
    table = Table("variant", "final loss", "PSNR")
    for row in rows:
        table.add_row(row.name, f"{row.final_loss:.6f}", f"{row.psnr:.3f}")
    Console().print(table)


@router.command("infer")
def run_infer(
    checkpoint: Annotated[Path, typer.Option(help="Checkpoint directory written by train")],
    input: Annotated[Path, typer.Option("--input", help="LR sequence directory, directory of sequences or manifest")],
    out: Annotated[Path, typer.Option(help="Directory receiving one HR sequence per input sequence")],
    workers: Annotated[int | None, typer.Option(min=1, help="Parallel sequences, defaults to SECN_WORKERS")] = None,
) -> None:
    """
    Super-resolve LR sequences frame by frame with a trained checkpoint.
    """
    logger = get_logger()
    params, _, manifest = load_checkpoint(checkpoint)
    cfg = config_from_manifest(manifest.config)

    def infer_one(source: Path) -> Path:
        hr = infer_sequence(read_sequence(source), params, cfg)
        return write_sequence(hr, out / source.name, sequence_format(source))

    with ThreadPoolExecutor(max_workers=workers or load_environment().WORKERS) as pool:
        written = list(pool.map(infer_one, sequence_dirs(input)))
    logger.info(f"Super-resolved {len(written)} sequences into {out} with the step {manifest.step} checkpoint")


@router.command("grad-check")
def run_grad_check(
    seed: Annotated[int, typer.Option(help="Seed of the random shapes and weights")] = 0,
) -> None:
    """
    Finite-difference check of every primitive and of the end-to-end network.
    """
    rows = primitive_suite(seed) + model_grad_check(seed)

    table = Table("op", "max rel err", "threshold", "ok")
    for row in rows:
        table.add_row(row.op, f"{row.max_rel_error:.3e}", f"{row.threshold:.0e}", "yes" if row.ok else "NO")
    Console().print(table)

    if not all(row.ok for row in rows):
        raise typer.Exit(code=EXIT_RUNTIME)
