"""
Toy Training Service

Closes the loop on EntityGrid-QA without a language model: a linear head
over mean-pooled assembled tokens scores every label of the identification
vocabulary, and the prediction is the best-scoring of the item's four
options. The ViT stays frozen; the head, sampler, separators and (for the
with-adapter run) the SliceRestore adapters are trained by full-batch
gradient descent.

Steps that would increase the loss are rejected: the learning rate is
halved and the step retried, so the loss history never increases.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from hireslab.config import settings
from hireslab.models.benchmark import EvalReport, QAItem, TaskType
from hireslab.models.config import PipelineConfig
from hireslab.models.image import ImageBuffer
from hireslab.numerics.ops import concat, cross_entropy, linear
from hireslab.numerics.params import LinearWeights, flatten_params, set_requires_grad, zeros
from hireslab.numerics.tensor import Tensor, enable_grad, no_grad
from hireslab.services.entitygrid_service import Corpus, evaluate, load_item_image
from hireslab.services.pipeline_service import PipelineWeights, encode_graph, init_pipeline_weights, zero_adapters
from hireslab.utils.errors import DimensionError, DivergenceError, PreconditionError
from hireslab.utils.files import PathLike, atomic_write_json
from hireslab.utils.metrics import metrics_collector

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 20
DEFAULT_LEARNING_RATE = 0.5
MIN_LEARNING_RATE = 1e-6


@dataclass
class ToyHeadWeights:
    """Linear classifier [D x V] over the label vocabulary."""

    classifier: LinearWeights
    vocabulary: List[str]

    def __post_init__(self):
        if self.classifier.weight.shape[1] != len(self.vocabulary):
            raise DimensionError(
                f"head outputs {self.classifier.weight.shape[1]} logits for {len(self.vocabulary)} labels"
            )

    @classmethod
    def init(cls, dim: int, vocabulary: Sequence[str]) -> "ToyHeadWeights":
        """Zero initialization: every option ties before training."""
        return cls(
            classifier=LinearWeights(weight=zeros((dim, len(vocabulary))), bias=zeros((len(vocabulary),))),
            vocabulary=list(vocabulary),
        )


@dataclass
class ToyModel:
    weights: PipelineWeights
    head: ToyHeadWeights


class TrainingHistory(BaseModel):
    losses: List[float] = Field(default_factory=list)
    learning_rates: List[float] = Field(default_factory=list)
    rejected_steps: int = 0
    stalled: bool = False

    @property
    def converged(self) -> bool:
        return len(self.losses) > 1 and self.losses[-1] < self.losses[0]


class ToyRunReport(BaseModel):
    name: str
    sra_enabled: bool
    report: EvalReport
    history: TrainingHistory


class ToyRunSummary(BaseModel):
    epochs: int
    seed: int
    items: int
    with_sra: ToyRunReport
    zero_sra: ToyRunReport
    direction_ok: Optional[bool] = Field(
        default=None, description=(
            "with-adapter D1 >= zero-adapter D1; the expected direction, not guaranteed at toy scale "
            "and not a pass/fail criterion"
        ),
    )


def trainable_tree(model: ToyModel, sra_enabled: bool) -> Dict[str, object]:
    tree = {
        "head": model.head.classifier,
        "sampler": model.weights.sampler,
        "separators": model.weights.separators,
    }
    if sra_enabled:
        tree["adapters"] = model.weights.adapters
    return tree


def pooled_features(images: Sequence[ImageBuffer], cfg: PipelineConfig, weights: PipelineWeights) -> Tensor:
    """Mean-pooled assembled tokens, one row per image: Tensor[N, D]."""
    rows = [encode_graph(img, cfg, weights).tokens.mean(axis=0, keepdims=True) for img in images]
    return concat(rows, axis=0)


def head_logits(features: Tensor, head: ToyHeadWeights) -> Tensor:
    return linear(features, head.classifier.weight, head.classifier.bias)


def toy_loss(model: ToyModel, images: Sequence[ImageBuffer], targets: Sequence[int], cfg: PipelineConfig) -> Tensor:
    return cross_entropy(head_logits(pooled_features(images, cfg, model.weights), model.head), targets)


def train_toy_model(
    model: ToyModel,
    images: Sequence[ImageBuffer],
    targets: Sequence[int],
    cfg: PipelineConfig,
    epochs: int,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> TrainingHistory:
    """
    Full-batch gradient descent with step halving.

    Raises:
        DivergenceError: If the loss or its gradient is not finite
    """
    params = flatten_params(trainable_tree(model, cfg.sra_enabled))
    set_requires_grad(params, True)
    history = TrainingHistory()
    step = learning_rate

    with no_grad():
        current = float(toy_loss(model, images, targets, cfg).data)
    if not np.isfinite(current):
        raise DivergenceError("initial loss is not finite", {"epoch": 0, "loss": current})
    history.losses.append(current)

    for epoch in range(1, epochs + 1):
        with metrics_collector.timed("toy.epoch"):
            for tensor in params.values():
                tensor.grad = None
            with enable_grad():
                loss = toy_loss(model, images, targets, cfg)
                loss.backward()
            grads = {
                name: tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
                for name, tensor in params.items()
            }
            bad = [name for name, grad in grads.items() if not np.all(np.isfinite(grad))]
            if bad or not np.isfinite(loss.data):
                raise DivergenceError(
                    "training diverged",
                    {"epoch": epoch, "loss": float(loss.data), "non_finite_grads": bad[:5], "lr": step},
                )
            originals = {name: tensor.data.copy() for name, tensor in params.items()}

            while True:
                for name, tensor in params.items():
                    tensor.data = originals[name] - step * grads[name]
                with no_grad():
                    trial = float(toy_loss(model, images, targets, cfg).data)
                if np.isfinite(trial) and trial <= current:
                    current = trial
                    break
                history.rejected_steps += 1
                step *= 0.5
                if step < MIN_LEARNING_RATE:
                    for name, tensor in params.items():
                        tensor.data = originals[name]
                    history.stalled = True
                    break

            history.losses.append(current)
            history.learning_rates.append(step)
            logger.debug(f"Toy epoch | Epoch: {epoch} | Loss: {current:.6f} | LR: {step:.3g}")
            if history.stalled:
                logger.info(f"Toy training stalled | Epoch: {epoch} | Loss: {current:.6f}")
                break
            step = min(learning_rate, step * 2.0)

    set_requires_grad(params, False)
    return history


def predict(
    model: ToyModel,
    items: Sequence[QAItem],
    images: Sequence[ImageBuffer],
    cfg: PipelineConfig,
) -> Dict[str, str]:
    """Best-scoring option per item (ties resolve to the earliest label)."""
    with no_grad():
        logits = head_logits(pooled_features(images, cfg, model.weights), model.head).data
    index = {label: i for i, label in enumerate(model.head.vocabulary)}
    predictions = {}
    for row, item in zip(logits, items):
        scores = [row[index[option.text]] for option in item.options]
        predictions[item.image_id] = item.options[int(np.argmax(scores))].label
    return predictions


def _run(
    name: str,
    sra_enabled: bool,
    items: Sequence[QAItem],
    images: Sequence[ImageBuffer],
    vocabulary: Sequence[str],
    cfg: PipelineConfig,
    epochs: int,
    seed: int,
    learning_rate: float,
) -> ToyRunReport:
    run_cfg = cfg.model_copy(update={"sra_enabled": sra_enabled})
    weights = init_pipeline_weights(run_cfg, seed)
    if not sra_enabled:
        weights = zero_adapters(weights)
    model = ToyModel(weights=weights, head=ToyHeadWeights.init(cfg.vit.dim, vocabulary))
    targets = [list(vocabulary).index(item.answer_text) for item in items]
    history = train_toy_model(model, images, targets, run_cfg, epochs, learning_rate)
    report = evaluate(predict(model, items, images, run_cfg), items)
    logger.info(
        f"Toy run finished | Config: {name} | Epochs: {epochs} | "
        f"Loss: {history.losses[0]:.4f} -> {history.losses[-1]:.4f} | D1: {report.D1}"
    )
    return ToyRunReport(name=name, sra_enabled=sra_enabled, report=report, history=history)


def toy_train_eval(
    corpus: Corpus,
    cfg: Optional[PipelineConfig] = None,
    epochs: int = DEFAULT_EPOCHS,
    seed: Optional[int] = None,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> ToyRunSummary:
    """
    Train and evaluate the with-adapter and zero-adapter configurations on
    the corpus's identification items.

    ``direction_ok`` records whether the adapter run scored a D1 at least as high.
    It is not guaranteed at toy scale and can flip between seeds.

    Raises:
        PreconditionError: If the corpus has no identification items
        DivergenceError: If training produces a non-finite loss
    """
    cfg = cfg or PipelineConfig.toy()
    seed = settings.default_seed if seed is None else seed
    if epochs < 0:
        raise PreconditionError(f"epochs must be non-negative, got {epochs}")
    items = [item for item in corpus.items if item.task == TaskType.IDENTIFICATION]
    if not items:
        raise PreconditionError("toy training needs identification items")
    images = [load_item_image(item, corpus.directory) for item in items]
    vocabulary = sorted({option.text for item in items for option in item.options})

    runs = {
        name: _run(name, enabled, items, images, vocabulary, cfg, epochs, seed, learning_rate)
        for name, enabled in (("with_sra", True), ("zero_sra", False))
    }
    d1_with, d1_zero = runs["with_sra"].report.D1, runs["zero_sra"].report.D1
    direction_ok = None if d1_with is None or d1_zero is None else d1_with >= d1_zero
    return ToyRunSummary(
        epochs=epochs,
        seed=seed,
        items=len(items),
        with_sra=runs["with_sra"],
        zero_sra=runs["zero_sra"],
        direction_ok=direction_ok,
    )


def write_toy_reports(out_dir: PathLike, summary: ToyRunSummary) -> Path:
    """with_sra.json, zero_sra.json and summary.json (written last)."""
    out_dir = Path(out_dir)
    atomic_write_json(out_dir / "with_sra.json", summary.with_sra.model_dump(mode="json"))
    atomic_write_json(out_dir / "zero_sra.json", summary.zero_sra.model_dump(mode="json"))
    return atomic_write_json(out_dir / "summary.json", summary.model_dump(mode="json"))
