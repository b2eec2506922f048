"""
EntityGrid-QA Benchmark Service

Generates multiple-choice questions about entities placed at nine lattice
positions of a 2R x 2R canvas and scores predictions per position. Positions
on the boundaries of the 2x2 slicing (2, 4, 5, 6, 8) are "edge" positions;
1, 3, 7, 9 lie strictly inside a slice. The discrepancy metrics compare the
two groups:

    D1 = acc_edge / acc_center
    D2 = (acc_edge - acc_center) / acc_center

Generation is a pure function of (seed, task, R): each item draws from its
own generator seeded by SeedSequence([seed, task, position, index]).
"""
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from hireslab.config import settings
from hireslab.models.benchmark import (
    CENTER_POSITIONS,
    EDGE_POSITIONS,
    OPTION_LABELS,
    CorpusManifest,
    EntitySpec,
    EvalReport,
    PlacedEntity,
    Placement,
    Prediction,
    QAItem,
    QAOption,
    TaskType,
)
from hireslab.models.image import ImageBuffer
from hireslab.services.entity_catalog import catalog_for, check_overlap, position_centers, render_image
from hireslab.utils.errors import AmbiguousPositionError, EvaluationError, PlacementError, PreconditionError
from hireslab.utils.files import PathLike, atomic_write_bytes, atomic_write_json, atomic_write_text, dumps_json
from hireslab.utils.image_io import encode_pnm, read_image

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "entitygrid-1.0"
CORPUS_FILE = "corpus.jsonl"
MANIFEST_FILE = "manifest.json"
IMAGE_DIR = "images"

TASK_ORDER: Tuple[TaskType, ...] = (TaskType.IDENTIFICATION, TaskType.POSITION, TaskType.COUNTING)
QUESTION_TEMPLATES = {
    TaskType.IDENTIFICATION: "What is the object in the picture?",
    TaskType.POSITION: "Where is the {subject} relative to the {reference} in the picture?",
    TaskType.COUNTING: "How many {subject} are in the picture?",
}
POSITION_ANSWERS = ("left", "right", "above", "below")
MAX_COUNT = 4
COUNT_ANSWERS = tuple(str(k) for k in range(1, MAX_COUNT + 1))
NUM_DISTRACTORS = len(OPTION_LABELS) - 1
ORACLES = ("perfect", "chance", "fragmented")


@dataclass
class Corpus:
    items: List[QAItem]
    manifest: CorpusManifest
    directory: Optional[Path] = None


# ----------------------------------------------------------------------
# Sampling and templating
# ----------------------------------------------------------------------
def sample_entities(
    rng: np.random.Generator,
    task: TaskType,
    catalog: Sequence[EntitySpec],
    probe_position: Optional[int] = None,
) -> Tuple[List[EntitySpec], List[int]]:
    """
    Draw the entities and positions of one item.

    Identification draws one entity at one position, counting one entity at
    1..4 positions, position two distinct entities at two positions.
    Positions are uniform without replacement; ``probe_position`` pins the
    first one.
    """
    task = TaskType(task)
    if task == TaskType.POSITION:
        n_entities, n_positions = 2, 2
    elif task == TaskType.COUNTING:
        n_entities, n_positions = 1, int(rng.integers(1, MAX_COUNT + 1))
    else:
        n_entities, n_positions = 1, 1
    picks = rng.choice(len(catalog), size=n_entities, replace=False)
    entities = [catalog[int(i)] for i in picks]

    if probe_position is None:
        positions = [int(p) + 1 for p in rng.choice(9, size=n_positions, replace=False)]
    else:
        rest = [p for p in range(1, 10) if p != probe_position]
        others = rng.choice(rest, size=n_positions - 1, replace=False) if n_positions > 1 else []
        positions = [int(probe_position)] + [int(p) for p in others]
    return entities, positions


def relative_position(subject: Placement, reference: Placement) -> str:
    """
    left/right/above/below of ``subject`` relative to ``reference`` along the dominant axis.

    Raises:
        AmbiguousPositionError: If |dx| == |dy|
    """
    dx = subject.x - reference.x
    dy = subject.y - reference.y
    if abs(dx) == abs(dy):
        raise AmbiguousPositionError(
            f"no dominant axis between positions {subject.position} and {reference.position}"
        )
    if abs(dx) > abs(dy):
        return "left" if dx < 0 else "right"
    return "above" if dy < 0 else "below"


def _unique(labels: Sequence[str]) -> List[str]:
    return list(dict.fromkeys(labels))


def gen_qa(
    task: TaskType,
    entities: Sequence[EntitySpec],
    positions: Sequence[int],
    rng: np.random.Generator,
    R: int,
    image_id: str,
    seed: int,
    catalog: Sequence[EntitySpec],
) -> QAItem:
    """
    Instantiate the task template and its four options.

    Raises:
        PreconditionError: If entity/position arity does not match the task
        AmbiguousPositionError: For position tasks without a dominant axis
    """
    task = TaskType(task)
    centers = {pl.position: pl for pl in position_centers(R)}
    if task == TaskType.IDENTIFICATION:
        if len(entities) != 1 or len(positions) != 1:
            raise PreconditionError("identification takes one entity at one position")
        answer = entities[0].label
        space = [label for label in _unique(e.label for e in catalog) if label != answer]
        placed = [PlacedEntity(entity=entities[0], position=positions[0])]
        question = QUESTION_TEMPLATES[task]
    elif task == TaskType.POSITION:
        if len(entities) != 2 or len(positions) != 2:
            raise PreconditionError("position tasks take two entities at two positions")
        answer = relative_position(centers[positions[0]], centers[positions[1]])
        space = [label for label in POSITION_ANSWERS if label != answer]
        placed = [PlacedEntity(entity=e, position=p) for e, p in zip(entities, positions)]
        question = QUESTION_TEMPLATES[task].format(subject=entities[0].label, reference=entities[1].label)
    else:
        if len(entities) != 1 or not 1 <= len(positions) <= MAX_COUNT:
            raise PreconditionError(f"counting takes one entity at 1..{MAX_COUNT} positions")
        answer = str(len(positions))
        space = [label for label in COUNT_ANSWERS if label != answer]
        placed = [PlacedEntity(entity=entities[0], position=p) for p in positions]
        question = QUESTION_TEMPLATES[task].format(subject=entities[0].label)

    if len(space) < NUM_DISTRACTORS:
        raise PreconditionError(f"answer space of {task.value} has too few distractors")
    distractors = [str(space[int(i)]) for i in rng.choice(len(space), size=NUM_DISTRACTORS, replace=False)]
    texts = [answer] + distractors
    order = [int(i) for i in rng.permutation(len(texts))]
    options = [QAOption(label=label, text=texts[i]) for label, i in zip(OPTION_LABELS, order)]
    return QAItem(
        task=task,
        image_id=image_id,
        R=R,
        entities=placed,
        question=question,
        options=options,
        answer=OPTION_LABELS[order.index(0)],
        probe_position=positions[0],
        seed=seed,
    )


def derive_item_seed(seed: int, task: TaskType, position: int, index: int) -> int:
    """Per-item seed from SeedSequence([seed, task, position, index])."""
    if seed < 0:
        raise PreconditionError(f"seed must be non-negative, got {seed}")
    task_index = TASK_ORDER.index(TaskType(task))
    state = np.random.SeedSequence([seed, task_index, position, index]).generate_state(1)
    return int(state[0])


def make_item(
    task: TaskType,
    position: int,
    index: int,
    R: int,
    seed: int,
    catalog: Optional[Sequence[EntitySpec]] = None,
    retries: Optional[int] = None,
) -> QAItem:
    """
    Generate one item probing ``position``; ambiguous or overlapping draws are resampled.

    Raises:
        PlacementError: If no valid draw is found within ``retries`` attempts
    """
    task = TaskType(task)
    catalog = catalog if catalog is not None else catalog_for(R)
    retries = settings.render_retries if retries is None else retries
    item_seed = derive_item_seed(seed, task, position, index)
    rng = np.random.default_rng(item_seed)
    image_id = f"{task.value}-{position}-{index:04d}"
    for attempt in range(retries):
        entities, positions = sample_entities(rng, task, catalog, probe_position=position)
        try:
            item = gen_qa(task, entities, positions, rng, R, image_id, item_seed, catalog)
            check_overlap(item.entities, R)
            return item
        except PlacementError as e:
            logger.debug(f"Placement resampled | Item: {image_id} | Attempt: {attempt + 1} | Reason: {e}")
    raise PlacementError(f"no valid placement for {image_id} after {retries} attempts")


# ----------------------------------------------------------------------
# Corpus generation and I/O
# ----------------------------------------------------------------------
def render_key(item: QAItem) -> str:
    placed = sorted((pe.entity.id, pe.position) for pe in item.entities)
    return json.dumps({"R": item.R, "entities": placed}, sort_keys=True)


def render_item(item: QAItem) -> ImageBuffer:
    return render_image(item.entities, item.R)


def image_file_name(key: str) -> str:
    return f"{IMAGE_DIR}/{hashlib.sha256(key.encode('utf-8')).hexdigest()[:20]}.ppm"


def corpus_jsonl(items: Sequence[QAItem]) -> str:
    return "".join(dumps_json(item.model_dump(mode="json")) + "\n" for item in items)


def generate_corpus(
    R: int,
    per_cell: int,
    seed: int,
    tasks: Optional[Sequence[TaskType]] = None,
    out_dir: Optional[PathLike] = None,
    write_images: bool = True,
    threads: Optional[int] = None,
) -> Corpus:
    """
    Generate tasks x 9 positions x per_cell items.

    Identical renders are rasterized once and share one image file. With an
    output directory, images, corpus.jsonl and manifest.json (last) are
    written atomically.

    Args:
        R: Half the canvas side
        per_cell: Items per (task, position) bucket
        seed: Corpus seed
        tasks: Task subset (default: all three)
        out_dir: Optional output directory
        write_images: Render images and record their paths and hashes
        threads: Worker cap (defaults to settings.threads)
    """
    if per_cell < 0:
        raise PreconditionError(f"per_cell must be non-negative, got {per_cell}")
    tasks = [TaskType(t) for t in (tasks or TASK_ORDER)]
    tasks = [t for t in TASK_ORDER if t in tasks]
    threads = threads or settings.threads
    catalog = catalog_for(R)
    jobs = [(task, p, i) for task in tasks for p in range(1, 10) for i in range(per_cell)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        items = list(pool.map(lambda job: make_item(job[0], job[1], job[2], R, seed, catalog), jobs))

        if write_images:
            keys = _unique([render_key(item) for item in items])
            by_key = {render_key(item): item for item in items}
            payloads = list(pool.map(lambda key: encode_pnm(render_item(by_key[key])), keys))
            images = dict(zip(keys, payloads))
            if out_dir is not None:
                for key, payload in images.items():
                    atomic_write_bytes(Path(out_dir) / image_file_name(key), payload)
            hashes = {key: hashlib.sha256(payload).hexdigest() for key, payload in images.items()}
            items = [
                item.model_copy(update={
                    "image_path": image_file_name(render_key(item)),
                    "image_sha256": hashes[render_key(item)],
                })
                for item in items
            ]

    text = corpus_jsonl(items)
    counts = {task.value: sum(1 for item in items if item.task == task) for task in tasks}
    manifest = CorpusManifest(
        generator_version=GENERATOR_VERSION,
        R=R,
        seed=seed,
        per_cell=per_cell,
        tasks=tasks,
        counts=counts,
        images_written=write_images,
        corpus_sha256=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )
    directory = None
    if out_dir is not None:
        directory = Path(out_dir)
        atomic_write_text(directory / CORPUS_FILE, text)
        atomic_write_json(directory / MANIFEST_FILE, manifest.model_dump(mode="json"))
    logger.info(
        f"Corpus generated | R: {R} | Items: {len(items)} | Seed: {seed} | "
        f"Images: {len(set(i.image_path for i in items)) if write_images else 0}"
    )
    return Corpus(items=items, manifest=manifest, directory=directory)


def regenerate_corpus(manifest: CorpusManifest, out_dir: Optional[PathLike] = None) -> Corpus:
    """Rebuild a corpus from its manifest."""
    return generate_corpus(
        R=manifest.R,
        per_cell=manifest.per_cell,
        seed=manifest.seed,
        tasks=manifest.tasks,
        out_dir=out_dir,
        write_images=manifest.images_written,
    )


def load_corpus(directory: PathLike) -> Corpus:
    directory = Path(directory)
    corpus_path = directory / CORPUS_FILE
    manifest_path = directory / MANIFEST_FILE
    if not corpus_path.exists() or not manifest_path.exists():
        raise FileNotFoundError(f"{directory} is missing {CORPUS_FILE} or {MANIFEST_FILE}")
    items = [
        QAItem.model_validate_json(line)
        for line in corpus_path.read_text().splitlines()
        if line.strip()
    ]
    manifest = CorpusManifest.model_validate_json(manifest_path.read_text())
    return Corpus(items=items, manifest=manifest, directory=directory)


def load_item_image(item: QAItem, directory: Optional[PathLike] = None) -> ImageBuffer:
    """The item's image from disk when present, otherwise re-rendered."""
    if directory is not None and item.image_path:
        path = Path(directory) / item.image_path
        if path.exists():
            return read_image(path)
    return render_item(item)


def load_predictions(path: PathLike) -> Dict[str, str]:
    """
    Read JSONL predictions {image_id, option}.

    Raises:
        EvaluationError: On duplicate image ids
    """
    predictions: Dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        record = Prediction.model_validate_json(line)
        if record.image_id in predictions:
            raise EvaluationError(f"duplicate prediction for {record.image_id}")
        predictions[record.image_id] = record.option
    return predictions


def write_predictions(path: PathLike, predictions: Mapping[str, str]) -> Path:
    text = "".join(
        dumps_json(Prediction(image_id=k, option=v).model_dump()) + "\n"
        for k, v in sorted(predictions.items())
    )
    return atomic_write_text(path, text)


# ----------------------------------------------------------------------
# Scoring
# ----------------------------------------------------------------------
def discrepancy(acc_edge: Optional[float], acc_center: Optional[float]) -> Tuple[Optional[float], Optional[float]]:
    """(D1, D2); both None when acc_center is 0 or undefined."""
    if acc_edge is None or acc_center is None or acc_center == 0:
        return None, None
    return acc_edge / acc_center, (acc_edge - acc_center) / acc_center


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def build_report(
    per_position: Mapping[int, Optional[float]],
    per_task: Optional[Mapping[str, Mapping[int, Optional[float]]]] = None,
    counts: Optional[Mapping[int, int]] = None,
) -> EvalReport:
    """
    Aggregate per-position accuracies A_p into the position-robustness report.

    acc_edge / acc_center average A_p over the edge / center positions;
    acc_mean / acc_std are the mean and population std of the defined A_p.
    """
    table = {p: per_position.get(p) for p in range(1, 10)}
    acc_edge = _mean([table[p] for p in EDGE_POSITIONS])
    acc_center = _mean([table[p] for p in CENTER_POSITIONS])
    defined = [v for v in table.values() if v is not None]
    d1, d2 = discrepancy(acc_edge, acc_center)
    return EvalReport(
        per_position=table,
        per_task={k: dict(v) for k, v in (per_task or {}).items()},
        counts=dict(counts or {}),
        acc_edge=acc_edge,
        acc_center=acc_center,
        acc_mean=float(np.mean(defined)) if defined else None,
        acc_std=float(np.std(defined)) if defined else None,
        D1=d1,
        D2=d2,
        D2_abs=abs(d2) if d2 is not None else None,
    )


def evaluate(
    predictions: Mapping[str, str],
    items: Sequence[QAItem],
    position_of: Optional[Mapping[str, int]] = None,
) -> EvalReport:
    """
    Score predictions per probe position with equal task weight.

    Args:
        predictions: image_id -> option label
        items: Evaluated items
        position_of: image_id -> probe position (defaults to each item's probe_position)

    Raises:
        EvaluationError: If an item has no prediction
    """
    missing = [item.image_id for item in items if item.image_id not in predictions]
    if missing:
        raise EvaluationError(f"{len(missing)} items have no prediction (first: {missing[0]})")

    correct: Dict[Tuple[str, int], int] = {}
    total: Dict[Tuple[str, int], int] = {}
    for item in items:
        position = position_of[item.image_id] if position_of is not None else item.probe_position
        key = (TaskType(item.task).value, position)
        total[key] = total.get(key, 0) + 1
        correct[key] = correct.get(key, 0) + int(predictions[item.image_id] == item.answer)

    task_names = sorted({task for task, _ in total})
    per_task = {
        task: {
            p: (correct[(task, p)] / total[(task, p)]) if (task, p) in total else None
            for p in range(1, 10)
        }
        for task in task_names
    }
    per_position = {p: _mean([per_task[task][p] for task in task_names]) for p in range(1, 10)}
    counts = {p: sum(n for (_, q), n in total.items() if q == p) for p in range(1, 10)}
    report = build_report(per_position, per_task, counts)
    logger.info(
        f"Benchmark evaluated | Items: {len(items)} | Edge: {report.acc_edge} | "
        f"Center: {report.acc_center} | D1: {report.D1}"
    )
    return report


def oracle_predictions(items: Sequence[QAItem], oracle: str, seed: int = 0) -> Dict[str, str]:
    """
    Built-in predictors.

    perfect: always the answer
    chance: a uniformly random label
    fragmented: the answer at center positions, chance at edge positions
    """
    if oracle not in ORACLES:
        raise PreconditionError(f"unknown oracle {oracle!r}; expected one of {ORACLES}")
    rng = np.random.default_rng(seed)
    predictions: Dict[str, str] = {}
    for item in items:
        guess = OPTION_LABELS[int(rng.integers(len(OPTION_LABELS)))]
        if oracle == "perfect" or (oracle == "fragmented" and item.probe_position in CENTER_POSITIONS):
            predictions[item.image_id] = item.answer
        else:
            predictions[item.image_id] = guess
    return predictions
