"""
Token feature maps with explicit 2D spatial shape.
"""
from dataclasses import dataclass
from typing import List, Tuple

from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import DimensionError


@dataclass
class FeatureMap:
    """
    Tokens [L, D] laid out on an H_t x W_t grid (row-major, L == H_t * W_t).
    """

    tokens: Tensor
    spatial: Tuple[int, int]

    def __post_init__(self):
        self.spatial = (int(self.spatial[0]), int(self.spatial[1]))
        if self.tokens.ndim != 2:
            raise DimensionError(f"feature tokens must be [L, D], got {self.tokens.shape}")
        if self.tokens.shape[0] != self.spatial[0] * self.spatial[1]:
            raise DimensionError(
                f"{self.tokens.shape[0]} tokens do not fill a {self.spatial[0]}x{self.spatial[1]} grid"
            )

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def length(self) -> int:
        return self.tokens.shape[0]

    def as_grid(self) -> Tensor:
        """Tokens reshaped to [H_t, W_t, D]."""
        return self.tokens.reshape(self.spatial[0], self.spatial[1], self.dim)

    @classmethod
    def from_grid(cls, grid: Tensor) -> "FeatureMap":
        h, w, d = grid.shape
        return cls(tokens=grid.reshape(h * w, d), spatial=(h, w))

    def coords(self) -> List[Tuple[int, int]]:
        return grid_coords(*self.spatial)


def grid_coords(height: int, width: int) -> List[Tuple[int, int]]:
    """(row, col) per token in row-major order."""
    return [(row, col) for row in range(height) for col in range(width)]
