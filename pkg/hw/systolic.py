"""Cycle model of the 3x3 input-stationary systolic convolution cores.

Each core owns a 3x3 PE array. For one output channel the array consumes one
input window per cycle (9 MACs), so a job costs ``H_out * W_out * C_in``
issue cycles per sample plus ``pipeline_fill`` cycles to drain. A batch is
streamed through each job back to back, so the drain is paid once per output
channel. Output channels are dealt round-robin to the cores and a layer
finishes when its busiest core does.
"""
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

from graph.layers import LayerKind
from hw.config import HwConfig


@dataclass(frozen=True)
class LayerShape:
    """Output geometry of one convolution as seen by the cores."""

    c_in: int
    c_out: int
    h_out: int
    w_out: int
    kernel: int = 3

    def __post_init__(self):
        if min(self.c_in, self.c_out, self.h_out, self.w_out, self.kernel) < 1:
            raise ValueError(f"LayerShape dimensions must be >= 1, got {self}")

    @property
    def pixels(self) -> int:
        return self.h_out * self.w_out


def _kind(kind: Union[LayerKind, str]) -> LayerKind:
    return LayerKind(kind)


def _job_tokens(shape: LayerShape, kind: LayerKind) -> int:
    if kind == LayerKind.DEPTHWISE:
        return shape.pixels
    return shape.pixels * shape.c_in


def cycles(shape: LayerShape, kind: Union[LayerKind, str], cfg: HwConfig = HwConfig(), batch: int = 1) -> int:
    """Closed-form cycle count of one layer on ``cfg.num_conv_cores`` cores."""
    kind = _kind(kind)
    if kind not in (LayerKind.CONV2D, LayerKind.POINTWISE, LayerKind.DEPTHWISE, LayerKind.LINEAR):
        raise ValueError(f"no systolic cycle model for {kind.value}")
    jobs = math.ceil(shape.c_out / cfg.num_conv_cores)
    return jobs * (batch * _job_tokens(shape, kind) + cfg.pipeline_fill)


def elementwise_cycles(elements: int, cfg: HwConfig = HwConfig()) -> int:
    """Shift-add units (one per core) process one element per cycle each."""
    return math.ceil(elements / cfg.num_conv_cores)


class SystolicPE:
    """One PE of the stationary window grid, latched on the clock edge."""

    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        self.current_value: Optional[Tuple[int, ...]] = None
        self.next_value: Optional[Tuple[int, ...]] = None

    def receive(self, value: Optional[Tuple[int, ...]]):
        self.next_value = value

    def cycle(self):
        self.current_value = self.next_value


class SystolicCore:
    """A 3x3 PE grid followed by ``pipeline_fill - 1`` reduction registers.

    Every clock a new window (or a bubble) lands in the grid, the grid's
    partial sum moves into the first reduction register and the last register
    writes back one output.
    """

    def __init__(self, pipeline_fill: int, size: int = 3):
        self.size = size
        self.pe_grid = [[SystolicPE(r, c) for c in range(size)] for r in range(size)]
        self.reduction: List[Optional[Tuple[Tuple[int, ...], ...]]] = [None] * (pipeline_fill - 1)
        self.cycle_count = 0
        self.written_back = 0
        self.macs = 0

    def _grid_token(self) -> Optional[Tuple[Tuple[int, ...], ...]]:
        # The nine PEs load together, so the grid holds one window or none.
        values = tuple(pe.current_value for row in self.pe_grid for pe in row)
        return None if values[0] is None else values

    def busy(self) -> bool:
        return self._grid_token() is not None or any(stage is not None for stage in self.reduction)

    def propagate_cycle(self, window: Optional[List[List[Tuple[int, ...]]]]):
        leaving = self.reduction[-1] if self.reduction else self._grid_token()
        if leaving is not None:
            self.written_back += 1
        if self.reduction:
            self.reduction = [self._grid_token()] + self.reduction[:-1]
        for r in range(self.size):
            for c in range(self.size):
                self.pe_grid[r][c].receive(None if window is None else window[r][c])
                self.pe_grid[r][c].cycle()
        if window is not None:
            self.macs += self.size * self.size
        self.cycle_count += 1


def _windows(shape: LayerShape, kind: LayerKind, channel: int, batch: int) -> Iterator[List[List[Tuple[int, ...]]]]:
    # A window is tagged by the input coordinates its nine PEs hold.
    in_channels = [channel] if kind == LayerKind.DEPTHWISE else range(shape.c_in)
    for sample in range(batch):
        for c in in_channels:
            for y in range(shape.h_out):
                for x in range(shape.w_out):
                    yield [[(sample, c, y + r, x + s) for s in range(3)] for r in range(3)]


def simulate_cycles(shape: LayerShape, kind: Union[LayerKind, str], cfg: HwConfig = HwConfig(),
                    batch: int = 1) -> int:
    """Clock the PE grids window by window until every core has drained."""
    kind = _kind(kind)
    cores = [SystolicCore(cfg.pipeline_fill) for _ in range(cfg.num_conv_cores)]
    for channel in range(shape.c_out):
        core = cores[channel % cfg.num_conv_cores]
        for window in _windows(shape, kind, channel, batch):
            core.propagate_cycle(window)
        # Drain before the next output channel replaces the stationary inputs.
        while core.busy():
            core.propagate_cycle(None)
    return max(core.cycle_count for core in cores)
