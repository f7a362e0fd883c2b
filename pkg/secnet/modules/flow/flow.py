from pathlib import Path
from typing import Annotated

import numpy as np
import typer

from secnet.common.config import build_model
from secnet.common.errors import DataError, DimensionError
from secnet.common.logger import get_logger
from secnet.modules.autodiff.tensor import Tensor, no_grad
from secnet.modules.autodiff.tensor_file import load_checkpoint, read_tensor, write_tensor
from secnet.modules.datapipe.frame_io import read_frame, write_ppm
from secnet.modules.flow.flow_types import FlowNetConfig
from secnet.modules.flow.flow_utils import estimate_flow
from secnet.modules.flow.flow_viz import flow_to_rgb

router = typer.Typer()


def _flow_from_checkpoint(checkpoint: Path, frame_a: np.ndarray, frame_b: np.ndarray) -> np.ndarray:
    params, _, manifest = load_checkpoint(checkpoint)
    widths = manifest.config.get("flow_widths")
    cfg = build_model(FlowNetConfig, widths=widths) if widths else FlowNetConfig()
    with no_grad():
        flow = estimate_flow(Tensor(frame_a), Tensor(frame_b), params.scope("flow"), cfg)
    return flow.data.data


@router.command("flow-viz")
def run_flow_viz(
    out: Annotated[Path, typer.Option(help="PPM file receiving the colour-coded flow")],
    frame_a: Annotated[Path | None, typer.Option(help="Reference frame t")] = None,
    frame_b: Annotated[Path | None, typer.Option(help="Neighbour frame k")] = None,
    checkpoint: Annotated[Path | None, typer.Option(help="Checkpoint whose flow module estimates F^{t->k}")] = None,
    flow: Annotated[Path | None, typer.Option(help="Existing [2,H,W] .ten flow field to render instead")] = None,
    save_flow: Annotated[Path | None, typer.Option(help="Also write the estimated flow as a .ten file")] = None,
    max_magnitude: Annotated[float | None, typer.Option(min=0.0, help="Magnitude mapped to full saturation")] = None,
) -> None:
    """
    Render an optical flow field as a colour-coded PPM image.
    """
    logger = get_logger()
    if flow is not None:
        field = read_tensor(flow)
    else:
        if frame_a is None or frame_b is None:
            raise DataError("flow-viz needs --frame-a and --frame-b, or --flow")
        a, b = read_frame(frame_a), read_frame(frame_b)
        if a.shape != b.shape:
            raise DimensionError("flow-viz", f"frames {a.shape} and {b.shape} differ")
        if checkpoint is None:
            raise DataError("flow-viz needs --checkpoint to estimate a flow from frames")
        field = _flow_from_checkpoint(checkpoint, a, b)
        if save_flow is not None:
            write_tensor(save_flow, field)

    write_ppm(out, flow_to_rgb(field, max_magnitude))
    magnitude = np.hypot(field[0], field[1])
    logger.info(f"Wrote flow visualization to {out} (mean magnitude {magnitude.mean():.3f} px)")
