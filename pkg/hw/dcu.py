"""Denoiser Control Unit: phase sequencing, functional run and cycle traces."""
import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from denoiser.block import DenoiserParams, bottleneck_channels
from graph.layers import MVM_KINDS, LayerDesc, LayerKind
from graph.model import ModelGraph
from hw.config import HwConfig
from hw.fixed_point import FxTensor, QFormat, dequantize, fx_conv, fx_leaky_relu, quantize
from hw.noise_cancel import LfsrBank, noise_cancel
from hw.systolic import LayerShape, cycles, elementwise_cycles
from utils.errors import PlacementError, ShapeError

logger = logging.getLogger(__name__)

BASELINE_PHASE = "conv"


@dataclass
class QuantizedDenoiser:
    """Fixed-point copy of a denoising block's four convolutions."""

    channels: int
    bottleneck: int
    layers: Dict[str, LayerDesc]
    weights: Dict[str, FxTensor]
    biases: Dict[str, FxTensor]


def quantize_denoiser(params: DenoiserParams, q: QFormat = QFormat()) -> QuantizedDenoiser:
    convs = params.convs()
    return QuantizedDenoiser(
        channels=params.channels,
        bottleneck=params.bottleneck,
        layers=convs,
        weights={name: quantize(layer.weight, q) for name, layer in convs.items()},
        biases={name: quantize(layer.bias, q) for name, layer in convs.items()},
    )


def dequantize_denoiser(qden: QuantizedDenoiser, params: DenoiserParams) -> DenoiserParams:
    """Float64 copy of ``params`` holding exactly the weights the DCU computes with."""
    reference = copy.deepcopy(params)
    for name, layer in reference.convs().items():
        layer.weight = dequantize(qden.weights[name])
        layer.bias = dequantize(qden.biases[name])
    reference.cast(torch.float64)
    return reference


def requantization_bound(qden: QuantizedDenoiser, eps: np.ndarray) -> np.ndarray:
    """Per-element bound, in LSBs, on ``dcu_run`` against the float block.

    The float block runs on the dequantized input with the weights of
    ``dequantize_denoiser`` and the hardware draws ``eps = Z1 / scale``.
    Every conv writeback rounds by at most half an LSB and every shift LReLU
    floors by less than one LSB; errors entering a conv grow by the L1 norm
    of its weight row. The bound assumes no word saturates.
    """
    scale = qden.weights["dw"].q.scale

    def row_l1(name: str) -> np.ndarray:
        weights = np.abs(qden.weights[name].raw).astype(np.float64) / scale
        return weights.reshape(weights.shape[0], -1)

    reduced = 0.5 + 1.0  # pw_reduce writeback, then LReLU
    trunk = row_l1("dw").sum(axis=1) * reduced + 0.5 + 1.0
    mean = row_l1("head_mean") @ trunk + 0.5
    spread = row_l1("head_scale") @ trunk + 0.5
    # gauss_gen rounds Z1 * sigma once more; the final subtraction is exact.
    return mean.reshape(1, -1, 1, 1) + np.abs(eps) * spread.reshape(1, -1, 1, 1) + 0.5


def denoiser_phase_cycles(channels: int, bottleneck: int, h: int, w: int,
                          cfg: HwConfig = HwConfig(), batch: int = 1) -> List[Tuple[str, int]]:
    """Cycle cost of every DCU phase for one attached block.

    Every phase streams the whole batch: convolution jobs pay their drain once
    per output channel and elementwise units see ``batch * elements`` inputs.
    """
    pixels = h * w
    act_cycles = elementwise_cycles(batch * bottleneck * pixels, cfg)
    phases = [
        ("pw_reduce", cycles(LayerShape(channels, bottleneck, h, w, 1), LayerKind.POINTWISE, cfg, batch)),
        ("lrelu_reduce", act_cycles),
        ("dw", cycles(LayerShape(bottleneck, bottleneck, h, w, 3), LayerKind.DEPTHWISE, cfg, batch)),
        ("lrelu_dw", act_cycles),
    ]
    if cfg.head_parallel:
        # Both heads share the cores as one pointwise layer with 2C outputs.
        both = cycles(LayerShape(bottleneck, 2 * channels, h, w, 1), LayerKind.POINTWISE, cfg, batch)
        phases.append(("heads", both))
    else:
        head_cycles = cycles(LayerShape(bottleneck, channels, h, w, 1), LayerKind.POINTWISE, cfg, batch)
        phases += [("head_mean", head_cycles), ("head_scale", head_cycles)]
    cancel = math.ceil(batch * channels * pixels / cfg.num_cancel_lanes) + cfg.cancel_pipeline_depth
    phases.append(("noise_cancel", cancel))
    return phases


def dcu_run(qden: QuantizedDenoiser, x_q: FxTensor, cfg: HwConfig = HwConfig(),
            bank: Optional[LfsrBank] = None) -> Tuple[FxTensor, List[Tuple[str, int]]]:
    """Run one block phase by phase in fixed point.

    Only one unit is active per phase. The cancellation phase draws its
    Gaussian samples from ``bank`` (advanced in place).

    Returns:
        (x_hat, [(phase, cycles), ...])
    """
    if len(x_q.shape) != 4 or x_q.shape[1] != qden.channels:
        raise ShapeError(f"dcu_run: input shape {x_q.shape} does not match {qden.channels} channels")
    if bank is None:
        bank = LfsrBank.from_master_seed(0, cfg.num_cancel_lanes)
    n, _, h, w = x_q.shape
    cores = cfg.num_conv_cores

    def conv(name: str, inputs: FxTensor) -> FxTensor:
        return fx_conv(qden.layers[name], inputs, qden.weights[name], qden.biases[name], cores=cores)

    trunk = fx_leaky_relu(conv("dw", fx_leaky_relu(conv("pw_reduce", x_q))))
    mu = conv("head_mean", trunk)
    sigma = conv("head_scale", trunk)
    x_hat, cancel_cycles = noise_cancel(x_q, mu, sigma, bank, cfg)

    phases = denoiser_phase_cycles(qden.channels, qden.bottleneck, h, w, cfg, batch=n)[:-1]
    phases.append(("noise_cancel", cancel_cycles))
    logger.debug(f"DCU: {qden.channels} channels at {h}x{w}, {sum(c for _, c in phases)} cycles")
    return x_hat, phases


@dataclass
class CycleReport:
    """Per-layer cycle trace: one ``conv`` row per layer plus denoiser phases."""

    rows: List[Dict] = field(default_factory=list)

    def add(self, layer: str, phase: str, count: int) -> None:
        self.rows.append({"layer": layer, "phase": phase, "cycles": int(count)})

    @property
    def baseline_cycles(self) -> int:
        return sum(row["cycles"] for row in self.rows if row["phase"] == BASELINE_PHASE)

    @property
    def denoiser_cycles(self) -> int:
        return sum(row["cycles"] for row in self.rows if row["phase"] != BASELINE_PHASE)

    @property
    def total_cycles(self) -> int:
        return self.baseline_cycles + self.denoiser_cycles

    @property
    def overhead_pct(self) -> float:
        if self.baseline_cycles == 0:
            return 0.0
        return (self.total_cycles - self.baseline_cycles) / self.baseline_cycles * 100.0

    def totals(self) -> Dict[str, float]:
        return {
            "baseline_cycles": self.baseline_cycles,
            "denoiser_cycles": self.denoiser_cycles,
            "total_cycles": self.total_cycles,
            "overhead_pct": self.overhead_pct,
        }

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=["layer", "phase", "cycles"])
        frame["cumulative"] = frame["cycles"].cumsum()
        return frame

    def layer_frame(self) -> pd.DataFrame:
        """Per-layer bars: baseline cycles and cycles added by a denoiser."""
        frame = self.to_frame()
        frame["denoiser"] = frame["phase"] != BASELINE_PHASE
        grouped = frame.groupby(["layer", "denoiser"], sort=False)["cycles"].sum().unstack(fill_value=0)
        order = list(dict.fromkeys(frame["layer"]))
        grouped = grouped.reindex(order).reindex(columns=[False, True], fill_value=0)
        out = pd.DataFrame({
            "layer": order,
            "baseline_cycles": grouped[False].to_numpy(),
            "denoiser_cycles": grouped[True].to_numpy(),
        })
        out["total_cycles"] = out["baseline_cycles"] + out["denoiser_cycles"]
        return out

    def to_csv(self, path: str, seed: int = 0) -> None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="") as handle:
            handle.write(f"# seed={seed}\n")
            self.to_frame().to_csv(handle, index=False)


def build_cycle_report(shape_table: pd.DataFrame, attachments: Mapping[str, float],
                       cfg: HwConfig = HwConfig()) -> CycleReport:
    """Cycle trace of a whole network.

    Args:
        shape_table: Rows with layer, kind, c_in, c_out, h_out, w_out, kernel
        attachments: Layer name -> bottleneck ratio of the denoiser attached after it
        cfg: Hardware parameters
    """
    known = set(shape_table["layer"])
    unknown = sorted(set(attachments) - known)
    if unknown:
        raise PlacementError(f"Denoiser attached to unknown layers: {', '.join(unknown)}")

    report = CycleReport()
    for row in shape_table.itertuples(index=False):
        shape = LayerShape(int(row.c_in), int(row.c_out), int(row.h_out), int(row.w_out), int(row.kernel))
        report.add(row.layer, BASELINE_PHASE, cycles(shape, row.kind, cfg))
        if row.layer in attachments:
            reduced = bottleneck_channels(shape.c_out, attachments[row.layer])
            for phase, count in denoiser_phase_cycles(shape.c_out, reduced, shape.h_out, shape.w_out, cfg):
                report.add(row.layer, phase, count)

    logger.info(
        f"Cycle report: {len(shape_table)} layers, {len(attachments)} denoisers, "
        f"overhead {report.overhead_pct:.2f}%"
    )
    return report


def shape_table_from_model(model: ModelGraph, input_hw: Sequence[int] = (32, 32)) -> pd.DataFrame:
    """Shape table of every matrix-vector layer of ``model`` (batch of one)."""
    shapes = model.activation_shapes((1, model.input_channels(), *input_hw))
    rows = []
    for index, layer in enumerate(model.layers):
        if layer.kind not in MVM_KINDS:
            continue
        out = shapes[index]
        h_out, w_out = (out[2], out[3]) if len(out) == 4 else (1, 1)
        rows.append({
            "layer": layer.label,
            "kind": layer.kind.value,
            "c_in": layer.in_channels,
            "c_out": layer.out_channels,
            "h_out": h_out,
            "w_out": w_out,
            "kernel": layer.kernel,
        })
    return pd.DataFrame(rows, columns=["layer", "kind", "c_in", "c_out", "h_out", "w_out", "kernel"])


def model_attachment_ratios(model: ModelGraph) -> Dict[str, float]:
    """Attachments keyed by the label of the layer they follow."""
    return {model.layers[index].label: params.ratio for index, params in model.attachments.items()}
