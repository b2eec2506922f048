"""
Slicing geometry model.
"""
from pydantic import BaseModel, ConfigDict, Field, model_validator


class GridSpec(BaseModel):
    """
    Dynamic slicing grid for one input image.

    Attributes:
        r: Base resolution (slice side) in pixels
        m: Rows of slices
        n: Columns of slices
        quadrupled: Whether the grid was doubled in both directions
        canvas_h: m * r
        canvas_w: n * r
        scale_applied: Pre-rescale factor for oversize inputs (1.0 if none)
    """

    model_config = ConfigDict(frozen=True)

    r: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    quadrupled: bool = False
    canvas_h: int = Field(..., ge=1)
    canvas_w: int = Field(..., ge=1)
    scale_applied: float = Field(default=1.0, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def check_geometry(self) -> "GridSpec":
        if self.canvas_h != self.m * self.r or self.canvas_w != self.n * self.r:
            raise ValueError(
                f"canvas {self.canvas_h}x{self.canvas_w} must equal "
                f"({self.m}*{self.r})x({self.n}*{self.r})"
            )
        if self.quadrupled and (self.m % 2 or self.n % 2):
            raise ValueError("a quadrupled grid must have even m and n")
        return self

    @property
    def num_slices(self) -> int:
        return self.m * self.n

    @classmethod
    def single(cls, r: int) -> "GridSpec":
        """1 x 1 grid, used for the low-resolution view."""
        return cls(r=r, m=1, n=1, quadrupled=False, canvas_h=r, canvas_w=r)
