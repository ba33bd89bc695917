"""Exception hierarchy shared by every package."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DatasetFormatError(ToolkitError, ValueError):
    """Dataset file does not follow the expected binary layout."""


class ShapeError(ToolkitError, ValueError):
    """Tensor shapes are incompatible with a layer."""


class LabelRangeError(ToolkitError, ValueError):
    """A class label is outside [0, classes)."""


class TapeMismatchError(ToolkitError, ValueError):
    """An activation tape was recorded on a different model."""


class PlacementError(ToolkitError, ValueError):
    """Invalid denoiser placement request."""


class ContainerError(ToolkitError):
    """Base class for model container decoding errors."""


class BadMagicError(ContainerError):
    """File does not start with the container magic."""


class VersionMismatchError(ContainerError):
    """Container version is not supported."""


class TruncatedPayloadError(ContainerError):
    """Container ends before a declared chunk or payload."""


class MissingPayloadError(ContainerError):
    """Manifest references a tensor that has no payload."""


class CorruptManifestError(ContainerError):
    """Manifest is not valid JSON or describes a tensor the reader cannot decode."""


class HardwareError(ToolkitError):
    """Base class for hardware model contract violations."""


class LfsrStateError(HardwareError, ValueError):
    """LFSR state is zero or out of range."""


class AccumulatorOverflowError(HardwareError, OverflowError):
    """A MAC accumulation left the 40-bit accumulator range."""
