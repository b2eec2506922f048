"""
EntityGrid-QA data models: entities, placements, QA items, reports.
"""
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

OPTION_LABELS = ("A", "B", "C", "D")
EDGE_POSITIONS = (2, 4, 5, 6, 8)
CENTER_POSITIONS = (1, 3, 7, 9)

Color = Tuple[float, float, float]


class EntityKind(str, Enum):
    """Entity categories of the benchmark entity set."""
    TEXT = "text"
    DIGIT = "digit"
    OBJECT = "object"
    SHAPE = "shape"
    RELPOS = "relpos"


class TaskType(str, Enum):
    IDENTIFICATION = "identification"
    POSITION = "position"
    COUNTING = "counting"


class IconPart(BaseModel):
    """One filled primitive of an icon, in units of the entity box (centered at 0,0)."""
    shape: Literal["circle", "rectangle", "triangle"]
    center: Tuple[float, float] = (0.0, 0.0)
    size: Tuple[float, float] = (1.0, 1.0)
    color: Color = (0.0, 0.0, 0.0)


class RenderPrimitive(BaseModel):
    """
    How an entity is drawn.

    glyphs: ``text`` in the built-in 5x7 bitmap font
    circle / triangle / rectangle: a single filled shape
    icon: a composite of ``parts``
    """
    type: Literal["glyphs", "circle", "triangle", "rectangle", "icon"]
    text: Optional[str] = None
    color: Color = (0.0, 0.0, 0.0)
    parts: List[IconPart] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_payload(self) -> "RenderPrimitive":
        if self.type == "glyphs" and not self.text:
            raise ValueError("glyph primitives need text")
        if self.type == "icon" and not self.parts:
            raise ValueError("icon primitives need parts")
        return self


class EntitySpec(BaseModel):
    id: str
    kind: EntityKind
    label: str = Field(..., min_length=1)
    render: RenderPrimitive


class Placement(BaseModel):
    """Grid position p in [1, 9] (row-major) and its pixel center (x, y)."""
    position: int = Field(..., ge=1, le=9)
    x: float
    y: float


class PlacedEntity(BaseModel):
    entity: EntitySpec
    position: int = Field(..., ge=1, le=9)


class QAOption(BaseModel):
    label: str
    text: str


class QAItem(BaseModel):
    """One multiple-choice benchmark sample."""

    task: TaskType
    image_id: str
    R: int = Field(..., ge=1)
    entities: List[PlacedEntity]
    question: str
    options: List[QAOption]
    answer: str
    probe_position: int = Field(..., ge=1, le=9)
    seed: int
    image_path: Optional[str] = None
    image_sha256: Optional[str] = None

    @model_validator(mode="after")
    def check_options(self) -> "QAItem":
        labels = tuple(option.label for option in self.options)
        if labels != OPTION_LABELS:
            raise ValueError(f"options must be labeled {OPTION_LABELS}, got {labels}")
        texts = [option.text for option in self.options]
        if len(set(texts)) != len(texts):
            raise ValueError("option texts must be distinct")
        if self.answer not in labels:
            raise ValueError(f"answer {self.answer!r} is not an option label")
        return self

    @property
    def answer_text(self) -> str:
        return next(o.text for o in self.options if o.label == self.answer)

    def option_label(self, text: str) -> Optional[str]:
        return next((o.label for o in self.options if o.text == text), None)


class Prediction(BaseModel):
    image_id: str
    option: str


class EvalReport(BaseModel):
    """
    Position-robustness report.

    ``per_position`` holds A_p, the task-averaged accuracy at position p
    (None when no item probes p). D1 = acc_edge / acc_center,
    D2 = (acc_edge - acc_center) / acc_center; both are None when
    acc_center is 0 or undefined.
    """

    per_position: Dict[int, Optional[float]]
    per_task: Dict[str, Dict[int, Optional[float]]] = Field(default_factory=dict)
    counts: Dict[int, int] = Field(default_factory=dict)
    acc_edge: Optional[float]
    acc_center: Optional[float]
    acc_mean: Optional[float]
    acc_std: Optional[float]
    D1: Optional[float]
    D2: Optional[float]
    D2_abs: Optional[float]
    std_definition: str = "population std of the per-position task-averaged accuracies A_1..A_9"

    @field_validator("per_position")
    @classmethod
    def check_positions(cls, v: Dict[int, Optional[float]]) -> Dict[int, Optional[float]]:
        if set(v) != set(range(1, 10)):
            raise ValueError("per_position must cover positions 1..9")
        return v


class CorpusManifest(BaseModel):
    """Everything needed to regenerate a corpus byte-for-byte."""
    generator_version: str
    R: int
    seed: int
    per_cell: int
    tasks: List[TaskType]
    counts: Dict[str, int]
    images_written: bool
    corpus_sha256: str
