from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.table import Table

from secnet.common.config import build_model
from secnet.common.environment import load_environment
from secnet.common.errors import DataError
from secnet.common.logger import get_logger
from secnet.modules.datapipe.frame_io import read_sequence, sequence_dirs
from secnet.modules.metrics.metrics_types import MetricConfig, SequenceMetrics
from secnet.modules.metrics.metrics_utils import (
    build_report,
    compare_reports,
    evaluate_sequence,
    format_comparison,
    read_report,
    write_report,
)

router = typer.Typer()


def _paired_dirs(pred: Path, gt: Path) -> list[tuple[Path, Path]]:
    truths = {directory.name: directory for directory in sequence_dirs(gt)}
    pairs = []
    for directory in sequence_dirs(pred):
        if directory.name not in truths:
            raise DataError(f"No ground truth sequence named {directory.name} under {gt}")
        pairs.append((directory, truths[directory.name]))
    return pairs


@router.command("eval")
def run_eval(
    pred: Annotated[Path, typer.Option(help="Predicted sequence directory or directory of sequences")],
    gt: Annotated[Path, typer.Option(help="Ground truth with matching sequence names")],
    out: Annotated[Path, typer.Option(help="Directory receiving report.txt, report.json and the PSNR curve")],
    border: Annotated[int, typer.Option(min=0, help="Peripheral pixels excluded on every side")] = 0,
    workers: Annotated[int | None, typer.Option(min=1, help="Parallel sequences, defaults to SECN_WORKERS")] = None,
) -> None:
    """
    Score predicted sequences with PSNR, SSIM_vh and SSIM_vt.
    """
    logger = get_logger()
    cfg = build_model(MetricConfig, border=border)
    pairs = _paired_dirs(pred, gt)

    def score(pair: tuple[Path, Path]) -> SequenceMetrics:
        return evaluate_sequence(read_sequence(pair[0]), read_sequence(pair[1]), cfg)

    with ThreadPoolExecutor(max_workers=workers or load_environment().WORKERS) as pool:
        sequences = list(pool.map(score, pairs))

    report = build_report(sequences, border=border)
    write_report(report, out)
    logger.info(f"Evaluated {len(sequences)} sequences: mean PSNR {report.mean_psnr:.3f} dB, SSIM_vh {report.mean_ssim_vh:.4f}")


@router.command("compare")
def run_compare(
    report_a: Annotated[Path, typer.Argument(help="Report JSON (or its directory) of method A")],
    report_b: Annotated[Path, typer.Argument(help="Report JSON (or its directory) of method B")],
    out: Annotated[Path | None, typer.Option(help="Also write the table to this text file")] = None,
) -> None:
    """
    Paired t-test of two metric reports over their shared sequences.
    """
    rows = compare_reports(read_report(report_a), read_report(report_b))

    table = Table("metric", "mean A", "mean B", "F_t/F_p", "n")
    for row in rows:
        table.add_row(row.metric, f"{row.mean_a:.4f}", f"{row.mean_b:.4f}", f"{row.t:.3f}/{row.p:.4f}", str(row.count))
    Console().print(table)

    if out is not None:
        out.write_text("\n".join(format_comparison(rows)) + "\n")
