"""
Toy training command: toy-run.
"""
import argparse

from hireslab.commands import emit, resolve_seed
from hireslab.commands.model import load_config
from hireslab.services.entitygrid_service import load_corpus
from hireslab.services.toy_training_service import (
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    toy_train_eval,
    write_toy_reports,
)


def run_toy(args: argparse.Namespace) -> int:
    summary = toy_train_eval(
        load_corpus(args.corpus),
        cfg=load_config(args.config),
        epochs=args.epochs,
        seed=resolve_seed(args),
        learning_rate=args.lr,
    )
    if args.out:
        write_toy_reports(args.out, summary)
    rows = [("config", "loss_start", "loss_end", "D1", "D2")] + [
        (run.name, f"{run.history.losses[0]:.4f}", f"{run.history.losses[-1]:.4f}", run.report.D1, run.report.D2)
        for run in (summary.with_sra, summary.zero_sra)
    ]
    emit(args, summary.model_dump(mode="json"), table=rows)
    return 0


def register(subparsers) -> None:
    toy = subparsers.add_parser(
        "toy-run",
        help="Train and compare with-adapter and zero-adapter toy models",
        description=(
            "Train and compare with-adapter and zero-adapter toy models. direction_ok tells whether the "
            "with-adapter D1 is at least the zero-adapter D1; that direction is not guaranteed at toy "
            "scale and does not affect the exit code."
        ),
    )
    toy.add_argument("--corpus", required=True, help="Corpus directory from bench-gen")
    toy.add_argument("--config", help="PipelineConfig JSON (default: toy-scale config)")
    toy.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    toy.add_argument("--lr", type=float, default=DEFAULT_LEARNING_RATE)
    toy.add_argument("--seed", type=int)
    toy.add_argument("--out", help="Report directory")
    toy.set_defaults(handler=run_toy)
