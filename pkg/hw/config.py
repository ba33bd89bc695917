"""Hardware model configuration."""
from pydantic import BaseModel, ConfigDict, Field


class HwConfig(BaseModel):
    """Denoiser accelerator parameters.

    Core and lane counts follow the 4-core / 4-lane evaluation setup; the
    clock is used only for reporting latencies in microseconds.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_conv_cores: int = Field(4, ge=1)
    num_cancel_lanes: int = Field(4, ge=1)
    lut_bits: int = Field(10, ge=1, le=16)
    pipeline_fill: int = Field(4, ge=1)
    cancel_pipeline_depth: int = Field(8, ge=1)
    clock_mhz: float = Field(500.0, gt=0)
    frac_bits: int = Field(8, ge=1, le=14)
    head_parallel: bool = False
