"""
In-memory image buffer used by the slicer and the benchmark renderer.
"""
from dataclasses import dataclass

import numpy as np

from hireslab.utils.errors import DimensionError, PreconditionError

# Resampling can overshoot [0, 1] by rounding only
VALUE_TOLERANCE = 1e-6


@dataclass
class ImageBuffer:
    """
    Row-major H x W x C image with values in [0, 1].

    Attributes:
        data: float64 array of shape (height, width, channels), channels in {1, 3}
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionError(f"image must be H x W x {{1,3}}, got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"image must be at least 1x1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise PreconditionError("image contains non-finite values")
        if data.min() < -VALUE_TOLERANCE or data.max() > 1.0 + VALUE_TOLERANCE:
            raise PreconditionError(
                f"image values must lie in [0, 1], got [{data.min()}, {data.max()}]"
            )
        self.data = np.clip(data, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def blank(cls, height: int, width: int, channels: int = 3, value: float = 0.0) -> "ImageBuffer":
        return cls(np.full((height, width, channels), value, dtype=np.float64))

    def to_channels(self, channels: int) -> "ImageBuffer":
        """Convert between grayscale and RGB (luma weights for RGB -> gray)."""
        if channels == self.channels:
            return self
        if channels == 3:
            return ImageBuffer(np.repeat(self.data, 3, axis=2))
        if channels == 1:
            luma = self.data @ np.array([0.299, 0.587, 0.114])
            return ImageBuffer(luma[:, :, None])
        raise DimensionError(f"unsupported channel count {channels}")
