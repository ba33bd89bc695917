from hw.config import HwConfig
from hw.dcu import (
    CycleReport,
    QuantizedDenoiser,
    build_cycle_report,
    dcu_run,
    denoiser_phase_cycles,
    dequantize_denoiser,
    model_attachment_ratios,
    quantize_denoiser,
    requantization_bound,
    shape_table_from_model,
)
from hw.fixed_point import FxTensor, QFormat, dequantize, fx_conv, fx_leaky_relu, quantize
from hw.lfsr import PERIOD, Lfsr, lfsr_next, lfsr_stream
from hw.noise_cancel import LfsrBank, noise_cancel
from hw.systolic import LayerShape, SystolicCore, SystolicPE, cycles, elementwise_cycles, simulate_cycles
from hw.unc import build_luts, dump_luts, gauss_gen, unc_z1, unc_z1_words

__all__ = [
    "HwConfig",
    "CycleReport",
    "QuantizedDenoiser",
    "build_cycle_report",
    "dcu_run",
    "denoiser_phase_cycles",
    "dequantize_denoiser",
    "model_attachment_ratios",
    "quantize_denoiser",
    "requantization_bound",
    "shape_table_from_model",
    "FxTensor",
    "QFormat",
    "dequantize",
    "fx_conv",
    "fx_leaky_relu",
    "quantize",
    "PERIOD",
    "Lfsr",
    "lfsr_next",
    "lfsr_stream",
    "LfsrBank",
    "noise_cancel",
    "LayerShape",
    "SystolicCore",
    "SystolicPE",
    "cycles",
    "elementwise_cycles",
    "simulate_cycles",
    "build_luts",
    "dump_luts",
    "gauss_gen",
    "unc_z1",
    "unc_z1_words",
]
