from pathlib import Path
from typing import Callable

import numpy as np

from secnet.common.config import build_model, read_key_values, write_key_values
from secnet.common.errors import ConfigError, DimensionError, NonFiniteError, TrainingError
from secnet.modules.autodiff.autodiff_types import GradCheckRow
from secnet.modules.autodiff.grad_check import MODEL_THRESHOLD, relative_error, sampled_numeric_gradient
from secnet.modules.autodiff.ops import add_n, scale
from secnet.modules.autodiff.params import Params
from secnet.modules.autodiff.tensor import Tensor, no_grad
from secnet.modules.datapipe.datapipe_utils import cubic_upsample
from secnet.modules.erff.erff_types import FrameFusionState
from secnet.modules.erff.erff_utils import decode, encode, erff_loss, fuse_inputs, init_erff_params
from secnet.modules.flow.flow_types import FlowField
from secnet.modules.flow.flow_utils import (
    estimate_flow,
    flow_loss_pair,
    flow_loss_total,
    init_flow_params,
    upsample_flow,
    warp_lr,
    zero_flow,
)
from secnet.modules.lffn.lffn_utils import init_lffn_params, lffn_forward, lffn_loss
from secnet.modules.sfe.sfe_types import SfeStrategy
from secnet.modules.sfe.sfe_utils import SequentialEncoder, init_sfe_params
from secnet.modules.trainer.trainer_types import FrameOutput, InitialEstimate, LossBreakdown, ModelConfig, Phase

COMPONENT_FLOW = "L_f"
COMPONENT_LFFN = "L_l"
COMPONENT_ERFF = "L_e"

LIST_FIELDS = ("flow_widths", "erff_widths")
PATH_FIELDS = ("train_data", "val_data")

NAMESPACES = ("flow", "lffn", "erff", "sfe")
MODEL_FD_STEP = 1e-6
SAMPLES_PER_TENSOR = 6


# ── Config files ──────────────────────────────────────────────────────────────


def load_config_file(path: Path, profile: str | None = None) -> ModelConfig:
    """
    Build a ModelConfig from a flat key=value file.

    A `profile` key selects the defaults the file overrides (the `profile` argument wins over it).
    List fields are comma-separated and relative data paths resolve against the file's directory.
    """
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")

    values: dict[str, object] = dict(read_key_values(path))
    file_profile = values.pop("profile", None)
    selected = profile or file_profile

    for key in LIST_FIELDS:
        if key in values:
            try:
                values[key] = [int(part) for part in str(values[key]).split(",")]
            except ValueError:
                raise ConfigError(key, f"expected comma-separated integers, got '{values[key]}'")
    for key in PATH_FIELDS:
        if key in values:
            location = Path(str(values[key]))
            values[key] = location if location.is_absolute() else path.parent / location

    if selected:
        return ModelConfig.for_profile(str(selected), **values)
    return build_model(ModelConfig, **values)


def dump_config_file(cfg: ModelConfig, path: Path) -> Path:
    values = cfg.model_dump(mode="json", exclude_none=True)
    for key in PATH_FIELDS:
        if key in values:
            values[key] = str(Path(values[key]).resolve())
    path.parent.mkdir(parents=True, exist_ok=True)
    write_key_values(path, values)
    return path


def config_from_manifest(values: dict) -> ModelConfig:
    return build_model(ModelConfig, **values)


# ── Model ─────────────────────────────────────────────────────────────────────


def init_model_params(cfg: ModelConfig, rng: np.random.Generator) -> Params:
    """Every parameter of the configured network under its module namespace."""
    params = Params()
    dtype = cfg.dtype
    init_flow_params(params.scope("flow"), cfg.flow_config(), cfg.channels, rng, dtype)
    if cfg.initial_estimate == InitialEstimate.LFFN:
        init_lffn_params(params.scope("lffn"), cfg.lffn_config(), rng, dtype)
    init_erff_params(params.scope("erff"), cfg.erff_config(), rng, dtype)
    init_sfe_params(params.scope("sfe"), cfg.sfe, cfg.erff_widths[2], rng, dtype)
    return params


class RecurrentSecnet:
    """
    Frame-by-frame driver of the full network over one clip or sequence.

    `frame_at(k)` returns the LR frame at absolute index k with the boundary rule already applied.
    The previous HR outputs, the scale-3 feature window and the ConvLSTM state live here and never
    cross into another sequence. `stage` names the loss component being computed, for error reports.
    """

    def __init__(
        self,
        params: Params,
        cfg: ModelConfig,
        frame_at: Callable[[int], Tensor],
        lr_shape: tuple[int, ...],
        training: bool = False,
    ):
        self.params = params
        self.cfg = cfg
        self.frame_at = frame_at
        self.training = training
        self.flow_cfg = cfg.flow_config()
        self.lffn_cfg = cfg.lffn_config()
        self.erff_cfg = cfg.erff_config()

        c, h, w = lr_shape
        self.hr_size = (h * cfg.scale, w * cfg.scale)
        self.detach_buffered = not (training and cfg.bptt_window)
        self.fusion = FrameFusionState(cfg.fused_frames, (c, *self.hr_size), cfg.dtype)
        self.encoder = SequentialEncoder(cfg.sfe, cfg.t3, params.scope("sfe"), detach_buffered=self.detach_buffered)
        self.stage = COMPONENT_FLOW

    def buffered_tensors(self) -> int:
        return len(self.fusion) + self.encoder.buffered_tensors()

    def _estimate(self, x_t: Tensor, t: int, k: int) -> FlowField:
        return estimate_flow(x_t, self.frame_at(k), self.params.scope("flow"), self.flow_cfg, source=t, target=k)

    def _hr_flow(self, x_t: Tensor, t: int, k: int, flows: dict[int, FlowField]) -> FlowField:
        if k < 0:
            # Y^k is zero before the first frame, any flow will do
            return zero_flow(*self.hr_size, frame=t, dtype=self.cfg.dtype)
        flow = flows.get(k)
        if flow is None:
            with no_grad():
                flow = self._estimate(x_t, t, k)
        return upsample_flow(flow, self.cfg.scale)

    def step(self, t: int, refine: bool = True) -> FrameOutput:
        """
        Frame t: flows to the 2*T1 neighbours, LR warps, initial estimate and, when `refine`,
        the recurrent refinement. Only the flow loss reaches the flow network unless
        `flow_grad_from_lffn` lets the estimate loss through the LR warps as well.
        """
        cfg = self.cfg
        x_t = self.frame_at(t)

        self.stage = COMPONENT_FLOW
        flows: dict[int, FlowField] = {}
        aligned: list[Tensor] = []
        pair_losses: list[Tensor] = []
        for k in range(t - cfg.t1, t + cfg.t1 + 1):
            if k == t:
                aligned.append(x_t)
                continue
            x_k = self.frame_at(k)
            flow = self._estimate(x_t, t, k)
            flows[k] = flow
            warped = warp_lr(x_k, flow)
            if self.training:
                pair_losses.append(flow_loss_pair(warped, x_t, flow, cfg.alpha))
            if flow.data.requires_grad and not cfg.flow_grad_from_lffn:
                warped = warp_lr(x_k, flow.detach())
            aligned.append(warped)
        loss_f = flow_loss_total(pair_losses, cfg.t1) if self.training else None

        self.stage = COMPONENT_LFFN
        if cfg.initial_estimate == InitialEstimate.LFFN:
            y_hat = lffn_forward(aligned, self.params.scope("lffn"), self.lffn_cfg)
        else:
            y_hat = Tensor(cubic_upsample(x_t.data, cfg.scale).astype(x_t.data.dtype))
        if not refine:
            return FrameOutput(y=y_hat, y_hat=y_hat, loss_f=loss_f)

        self.stage = COMPONENT_ERFF
        erff = self.params.scope("erff")
        hr_flows = [self._hr_flow(x_t, t, t - j, flows) for j in range(1, cfg.fused_frames + 1)]
        fused = fuse_inputs(y_hat, self.fusion.previous(), hr_flows)
        e1, e2, e3 = encode(fused, erff, self.erff_cfg)
        y = decode(e1, e2, self.encoder.step(e3), y_hat, erff, self.erff_cfg)
        self.fusion.push(y.detach() if self.detach_buffered else y)
        return FrameOutput(y=y, y_hat=y_hat, loss_f=loss_f)


def clip_forward(
    lr: np.ndarray, hr: np.ndarray, params: Params, cfg: ModelConfig, phase: Phase = Phase.JOINT
) -> tuple[Tensor, LossBreakdown]:
    """
    Run one N-frame clip from empty buffers and return (1/N) * sum_t (L_e + L_l + gamma * L_f)
    together with the per-frame means of its components. The pretrain phase skips the refinement,
    so L_e is reported as zero and the erff and sfe parameters stay out of the graph.
    """
    if lr.ndim != 4 or hr.ndim != 4 or lr.shape[0] != hr.shape[0]:
        raise DimensionError("clip_forward", f"LR clip {lr.shape} and HR clip {hr.shape} do not pair up")

    n = lr.shape[0]
    frames = [Tensor(np.ascontiguousarray(frame, dtype=cfg.dtype)) for frame in lr]
    targets = [Tensor(np.ascontiguousarray(frame, dtype=cfg.dtype)) for frame in hr]
    # If k <= 0, X^k = X^1; past the end the last frame repeats
    runner = RecurrentSecnet(params, cfg, lambda k: frames[min(max(k, 0), n - 1)], frames[0].shape, training=True)
    refine = phase == Phase.JOINT

    totals: list[Tensor] = []
    components: dict[str, list[float]] = {COMPONENT_ERFF: [], COMPONENT_LFFN: [], COMPONENT_FLOW: []}
    for t in range(n):
        try:
            out = runner.step(t, refine)
            runner.stage = COMPONENT_LFFN
            loss_l = lffn_loss(out.y_hat, targets[t])
            terms = [loss_l, scale(out.loss_f, cfg.gamma)]
            loss_e = 0.0
            if refine:
                runner.stage = COMPONENT_ERFF
                loss_e_tensor = erff_loss(out.y, targets[t])
                terms.insert(0, loss_e_tensor)
                loss_e = loss_e_tensor.item()
            totals.append(add_n(terms))
        except NonFiniteError as e:
            raise TrainingError(f"Non-finite loss: {e.detail}", frame=t, component=runner.stage)

        components[COMPONENT_ERFF].append(loss_e)
        components[COMPONENT_LFFN].append(loss_l.item())
        components[COMPONENT_FLOW].append(out.loss_f.item())

    total = scale(add_n(totals), 1.0 / n)
    breakdown = LossBreakdown(
        loss=total.item(),
        loss_e=float(np.mean(components[COMPONENT_ERFF])),
        loss_l=float(np.mean(components[COMPONENT_LFFN])),
        loss_f=float(np.mean(components[COMPONENT_FLOW])),
    )
    return total, breakdown


def mean_breakdown(breakdowns: list[LossBreakdown]) -> LossBreakdown:
    return LossBreakdown(
        loss=float(np.mean([b.loss for b in breakdowns])),
        loss_e=float(np.mean([b.loss_e for b in breakdowns])),
        loss_l=float(np.mean([b.loss_l for b in breakdowns])),
        loss_f=float(np.mean([b.loss_f for b in breakdowns])),
    )


# ── End-to-end gradient check ─────────────────────────────────────────────────


def grad_check_config(**overrides) -> ModelConfig:
    """A network small enough to finite-difference: every module present, a few thousand weights."""
    values = dict(
        channels=3,
        t1=1,
        t2=1,
        t3=1,
        n_frames=3,
        lr_size=4,
        flow_widths=[4, 2],
        lffn_base_width=4,
        lffn_growth=2,
        lffn_n_blocks=1,
        lffn_n_layers=1,
        erff_widths=[2, 2, 2],
        n_res_blocks=2,
        sfe=SfeStrategy.FUSED,
        batch_size=1,
    )
    values.update(overrides)
    return build_model(ModelConfig, **values)


def model_grad_check(seed: int = 0, cfg: ModelConfig | None = None) -> list[GradCheckRow]:
    """
    Backward of the clip loss against central differences, one row per module namespace.

    Flow parameters are compared with the difference quotient of the flow term alone: their
    gradient is cut off from the other terms, which still read the flows by value.
    """
    cfg = cfg or grad_check_config()
    rng = np.random.default_rng(seed)
    params = init_model_params(cfg, rng)

    # move the zero-initialized heads off their trivial point: non-integer sample positions
    # for the warps and a refinement that depends on the encoder
    head = f"flow.conv.{len(cfg.flow_widths) - 1}"
    params[f"{head}.w"].data[...] = rng.normal(0.0, 0.05, size=params[f"{head}.w"].shape)
    params[f"{head}.b"].data[...] = 0.3
    params["erff.out.w"].data[...] = rng.normal(0.0, 0.1, size=params["erff.out.w"].shape)

    size = cfg.lr_size
    lr = rng.uniform(size=(cfg.n_frames, cfg.channels, size, size))
    hr = rng.uniform(size=(cfg.n_frames, cfg.channels, size * cfg.scale, size * cfg.scale))

    params.zero_grad()
    total, _ = clip_forward(lr, hr, params, cfg)
    total.backward()

    def total_loss() -> float:
        with no_grad():
            return clip_forward(lr, hr, params, cfg)[0].item()

    def flow_term() -> float:
        with no_grad():
            return cfg.gamma * clip_forward(lr, hr, params, cfg)[1].loss_f

    rows = []
    for namespace in NAMESPACES:
        scoped = list(params.scope(namespace).items())
        if not scoped:
            continue
        evaluate = flow_term if namespace == "flow" else total_loss
        analytic, numeric = [], []
        for _, tensor in scoped:
            count = min(SAMPLES_PER_TENSOR, tensor.data.size)
            indices = rng.choice(tensor.data.size, size=count, replace=False)
            grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            analytic.append(grad.reshape(-1)[indices])
            numeric.append(sampled_numeric_gradient(evaluate, tensor.data, indices, MODEL_FD_STEP))
        error = relative_error(np.concatenate(analytic), np.concatenate(numeric))
        rows.append(GradCheckRow(op=f"model.{namespace}", max_rel_error=error, threshold=MODEL_THRESHOLD))
    return rows
