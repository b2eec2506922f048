"""
EntityGrid benchmark commands: bench-gen, bench-eval.
"""
import argparse
import logging

from hireslab.commands import emit, resolve_seed
from hireslab.models.benchmark import TaskType
from hireslab.services.entitygrid_service import (
    ORACLES,
    evaluate,
    generate_corpus,
    load_corpus,
    load_predictions,
    oracle_predictions,
)
from hireslab.utils.files import atomic_write_json

logger = logging.getLogger(__name__)


def run_bench_gen(args: argparse.Namespace) -> int:
    corpus = generate_corpus(
        R=args.r,
        per_cell=args.per_cell,
        seed=resolve_seed(args),
        tasks=args.tasks,
        out_dir=args.out,
        write_images=not args.no_images,
        threads=args.threads,
    )
    emit(args, {"out": str(args.out), "manifest": corpus.manifest.model_dump(mode="json")})
    return 0


def run_bench_eval(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    if args.predictions:
        predictions = load_predictions(args.predictions)
    else:
        predictions = oracle_predictions(corpus.items, args.oracle, resolve_seed(args))
    report = evaluate(predictions, corpus.items)
    payload = report.model_dump(mode="json")
    if args.out:
        atomic_write_json(args.out, payload)
    rows = [("position", "accuracy")] + [
        (p, "-" if acc is None else f"{acc:.4f}") for p, acc in report.per_position.items()
    ] + [("D1", report.D1), ("D2", report.D2)]
    emit(args, payload, table=rows)
    return 0


def register(subparsers) -> None:
    gen = subparsers.add_parser("bench-gen", help="Generate an EntityGrid-QA corpus")
    gen.add_argument("--r", type=int, required=True, help="Half canvas side R (canvas is 2R x 2R)")
    gen.add_argument("--per-cell", type=int, required=True, help="Items per task and position")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--tasks", nargs="+", choices=[t.value for t in TaskType], help="Task subset")
    gen.add_argument("--no-images", action="store_true", help="Skip rendering image files")
    gen.add_argument("--out", required=True, help="Corpus directory")
    gen.set_defaults(handler=run_bench_gen)

    ev = subparsers.add_parser("bench-eval", help="Score predictions per grid position")
    ev.add_argument("--corpus", required=True, help="Corpus directory")
    source = ev.add_mutually_exclusive_group(required=True)
    source.add_argument("--predictions", help="JSONL of {image_id, option}")
    source.add_argument("--oracle", choices=ORACLES, help="Built-in predictor")
    ev.add_argument("--seed", type=int, help="Seed for the chance-based oracles")
    ev.add_argument("--out", help="Report JSON path")
    ev.set_defaults(handler=run_bench_eval)
