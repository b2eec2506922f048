"""
Sequence Assembly Service

Builds the final visual token sequence:

    [lowres] [sep_global] row_0 ... row_{m-1}
    row_i = slice_{i,0} [sep_slice] slice_{i,1} ... slice_{i,n-1} [sep_row]

Separators are one learned token per occurrence and are dropped entirely
when disabled. Also provides the closed-form token count.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple, Union

import numpy as np

from hireslab.models.grid import GridSpec
from hireslab.models.sequence import AssembledSequence, Span, SpanTag
from hireslab.numerics.ops import concat
from hireslab.numerics.params import INIT_STD, gaussian
from hireslab.numerics.tensor import Tensor
from hireslab.services.sampler_service import sampled_tokens
from hireslab.utils.errors import DimensionError, PreconditionError

GridShape = Union[GridSpec, Tuple[int, int]]

# Max-token table for a 4x4 grid without separators: (base, patch, kernel, printed max tokens)
TOKEN_TABLE_REFERENCE = (
    (224, 14, 2, 1088),
    (224, 14, 4, 272),
    (224, 14, 8, 68),
    (336, 14, 2, 2448),
    (336, 14, 3, 1088),
    (336, 14, 4, 512),
)


@dataclass
class SeparatorSet:
    """Learned separator embeddings, each [D]."""

    sep_global: Tensor
    sep_slice: Tensor
    sep_row: Tensor

    def __post_init__(self):
        dim = self.sep_global.shape
        if len(dim) != 1 or self.sep_slice.shape != dim or self.sep_row.shape != dim:
            raise DimensionError("separators must be three vectors of the same dimension")

    @property
    def dim(self) -> int:
        return self.sep_global.shape[0]

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, std: float = INIT_STD) -> "SeparatorSet":
        return cls(
            sep_global=gaussian((dim,), rng, std),
            sep_slice=gaussian((dim,), rng, std),
            sep_row=gaussian((dim,), rng, std),
        )


def _grid_shape(grid: GridShape) -> Tuple[int, int]:
    if isinstance(grid, GridSpec):
        return grid.m, grid.n
    m, n = grid
    if m < 1 or n < 1:
        raise PreconditionError(f"grid must be at least 1x1, got {m}x{n}")
    return int(m), int(n)


def assemble(
    lowres: Tensor,
    slices: List[Tensor],
    grid: GridShape,
    seps: SeparatorSet,
    use_seps: bool = True,
) -> AssembledSequence:
    """
    Concatenate low-res and slice tokens (row-major) with optional separators.

    Raises:
        DimensionError: If the slice count is not m * n or widths disagree
    """
    m, n = _grid_shape(grid)
    if len(slices) != m * n:
        raise DimensionError(f"expected {m * n} slice token sets, got {len(slices)}")
    dim = lowres.shape[1]
    for tokens in slices:
        if tokens.ndim != 2 or tokens.shape[1] != dim:
            raise DimensionError(f"slice tokens {tokens.shape} do not match width {dim}")
    if use_seps and seps.dim != dim:
        raise DimensionError(f"separator dim {seps.dim} does not match token width {dim}")

    pieces: List[Tensor] = []
    layout: List[Span] = []
    offset = 0

    def push(tensor: Tensor, tag: SpanTag, index=None) -> None:
        nonlocal offset
        pieces.append(tensor)
        layout.append(Span(tag=tag, start=offset, length=tensor.shape[0], index=index))
        offset += tensor.shape[0]

    push(lowres, SpanTag.LOWRES)
    if use_seps:
        push(seps.sep_global.reshape(1, dim), SpanTag.SEP_GLOBAL)
    for row in range(m):
        for col in range(n):
            if use_seps and col > 0:
                push(seps.sep_slice.reshape(1, dim), SpanTag.SEP_SLICE)
            k = row * n + col
            push(slices[k], SpanTag.SLICE, index=k)
        if use_seps:
            push(seps.sep_row.reshape(1, dim), SpanTag.SEP_ROW)
    return AssembledSequence(tokens=concat(pieces, axis=0), layout=layout)


def separator_counts(grid: GridShape) -> Dict[str, int]:
    m, n = _grid_shape(grid)
    return {"sep_global": 1, "sep_slice": m * (n - 1), "sep_row": m}


def count_tokens(grid: GridShape, lowres_tokens: int, slice_tokens: int, use_seps: bool = False) -> int:
    """Closed-form length of ``assemble``'s output."""
    m, n = _grid_shape(grid)
    total = lowres_tokens + m * n * slice_tokens
    if use_seps:
        total += sum(separator_counts((m, n)).values())
    return total


def tokens_per_view(base: int, patch: int, kernel: int) -> int:
    """Sampler output tokens for one r x r view."""
    if base % patch:
        raise PreconditionError(f"patch {patch} must divide base resolution {base}")
    side = base // patch
    if side % kernel:
        raise PreconditionError(f"kernel {kernel} must divide the {side}x{side} token grid")
    return sampled_tokens((side, side), kernel)


def max_token_rows(max_grid: Tuple[int, int] = (4, 4)) -> List[dict]:
    """
    Max-token rows for the reference base/kernel combinations.

    ``matches`` is False where the printed value disagrees with the
    closed form (336 / 4x4 prints 512; the formula gives 612).
    """
    rows = []
    for base, patch, kernel, printed in TOKEN_TABLE_REFERENCE:
        per_view = tokens_per_view(base, patch, kernel)
        computed = count_tokens(max_grid, per_view, per_view, use_seps=False)
        rows.append({
            "base": base,
            "patch": patch,
            "kernel": kernel,
            "tokens_per_slice": per_view,
            "max_tokens": computed,
            "printed_max_tokens": printed,
            "matches": computed == printed,
        })
    return rows
