"""
Assembled visual token sequence and its span layout.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from hireslab.numerics.tensor import Tensor
from hireslab.utils.errors import InvariantViolation


class SpanTag(str, Enum):
    LOWRES = "lowres"
    SEP_GLOBAL = "sep_global"
    SLICE = "slice"
    SEP_SLICE = "sep_slice"
    SEP_ROW = "sep_row"


class Span(BaseModel):
    """Contiguous run of tokens with one role; ``index`` is k for slice spans."""
    tag: SpanTag
    start: int = Field(..., ge=0)
    length: int = Field(..., ge=1)
    index: Optional[int] = None


@dataclass
class AssembledSequence:
    tokens: Tensor
    layout: List[Span]

    def __post_init__(self):
        total = sum(span.length for span in self.layout)
        if total != self.tokens.shape[0]:
            raise InvariantViolation(f"layout covers {total} tokens, sequence has {self.tokens.shape[0]}")

    @property
    def length(self) -> int:
        return self.tokens.shape[0]

    def spans(self, tag: SpanTag) -> List[Span]:
        return [span for span in self.layout if span.tag == tag]

    def layout_json(self) -> Dict[str, Any]:
        return {
            "length": self.length,
            "dim": self.tokens.shape[1],
            "spans": [span.model_dump(mode="json", exclude_none=True) for span in self.layout],
        }
