import numpy as np
from matplotlib.colors import hsv_to_rgb

from secnet.common.errors import DimensionError


def flow_to_rgb(flow: np.ndarray, max_magnitude: float | None = None) -> np.ndarray:
    """
    Colour-code a [2, H, W] flow: hue is the direction, saturation the magnitude relative
    to `max_magnitude` (the field's own maximum by default). Zero motion is white.
    """
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise DimensionError("flow_to_rgb", f"expected a [2, H, W] flow, got {flow.shape}")
    dy, dx = flow
    magnitude = np.hypot(dy, dx)
    scale = max_magnitude if max_magnitude is not None else float(magnitude.max())

    hsv = np.empty((*magnitude.shape, 3))
    hsv[..., 0] = (np.arctan2(dy, dx) % (2 * np.pi)) / (2 * np.pi)
    hsv[..., 1] = np.clip(magnitude / scale, 0.0, 1.0) if scale > 0 else 0.0
    hsv[..., 2] = 1.0
    return hsv_to_rgb(hsv).transpose(2, 0, 1)
