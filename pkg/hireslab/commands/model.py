"""
Model commands: init-weights, encode, gradcheck, tokens.
"""
import argparse
import logging
from pathlib import Path
from typing import Optional

from hireslab.commands import emit, parse_grid, resolve_seed
from hireslab.models.config import PipelineConfig
from hireslab.services.assembler_service import count_tokens, separator_counts, max_token_rows
from hireslab.services.gradcheck_service import REGISTRY, run_checks, summarize
from hireslab.services.pipeline_service import encode, init_pipeline_weights, load_pipeline, save_pipeline
from hireslab.utils.files import atomic_write_json
from hireslab.utils.image_io import read_image
from hireslab.utils.tensor_io import write_tensor

logger = logging.getLogger(__name__)


def load_config(path: Optional[str]) -> Optional[PipelineConfig]:
    if path is None:
        return None
    return PipelineConfig.model_validate_json(Path(path).read_text())


def run_init_weights(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) or PipelineConfig()
    seed = resolve_seed(args)
    weights = init_pipeline_weights(cfg, seed)
    save_pipeline(args.out, cfg, weights)
    emit(args, {"out": str(args.out), "seed": seed, "config": cfg.model_dump(mode="json")})
    return 0


def run_encode(args: argparse.Namespace) -> int:
    cfg, weights = load_pipeline(args.weights, load_config(args.config))
    sequence = encode(read_image(args.image), cfg, weights)
    write_tensor(args.out, sequence.tokens.data)
    layout = sequence.layout_json()
    if args.layout:
        atomic_write_json(args.layout, layout)
    emit(args, {"length": sequence.length, "dim": layout["dim"], "out": str(args.out)})
    return 0


def run_gradcheck(args: argparse.Namespace) -> int:
    names = None if args.all or not args.op else args.op
    seeds = [resolve_seed(args) + k for k in range(args.seeds)]
    results = run_checks(names, seeds=seeds, eps=args.eps, max_coords=args.max_coords)
    table = summarize(results)
    failed = sorted(name for name, entry in table.items() if not entry["passed"])
    rows = [("op", "max_rel_error", "threshold", "passed")] + [
        (name, f"{entry['max_rel_error']:.3e}", f"{entry['threshold']:.0e}", entry["passed"])
        for name, entry in table.items()
    ]
    emit(args, {"checks": table, "failed": failed, "seeds": seeds}, table=rows)
    if failed:
        logger.warning(f"Gradient checks failed | Ops: {', '.join(failed)}")
        return 1
    return 0


def run_tokens(args: argparse.Namespace) -> int:
    if args.table:
        rows = max_token_rows()
        header = [("base", "patch", "kernel", "per_slice", "max_tokens", "printed", "matches")]
        emit(args, {"rows": rows}, table=header + [
            (r["base"], r["patch"], r["kernel"], r["tokens_per_slice"], r["max_tokens"],
             r["printed_max_tokens"], r["matches"])
            for r in rows
        ])
        return 0
    if args.grid is None or args.per_slice is None:
        raise ValueError("tokens needs --grid and --per-slice (or --table)")
    lowres = args.per_slice if args.lowres is None else args.lowres
    total = count_tokens(args.grid, lowres, args.per_slice, args.separators)
    payload = {"grid": list(args.grid), "tokens": total, "separators": args.separators}
    if args.separators:
        payload["separator_counts"] = separator_counts(args.grid)
    emit(args, payload)
    return 0


def register(subparsers) -> None:
    init = subparsers.add_parser("init-weights", help="Write seeded pipeline weights to a manifest directory")
    init.add_argument("--config", help="PipelineConfig JSON (default: PipelineConfig())")
    init.add_argument("--seed", type=int)
    init.add_argument("--out", required=True, help="Weight directory")
    init.set_defaults(handler=run_init_weights)

    enc = subparsers.add_parser("encode", help="Encode an image into the assembled token sequence")
    enc.add_argument("--image", required=True)
    enc.add_argument("--config", help="PipelineConfig JSON (default: the one stored with the weights)")
    enc.add_argument("--weights", required=True, help="Weight directory written by init-weights")
    enc.add_argument("--out", required=True, help="TNSR1 output path")
    enc.add_argument("--layout", help="Layout JSON output path")
    enc.set_defaults(handler=run_encode)

    grad = subparsers.add_parser("gradcheck", help="Finite-difference gradient verification")
    which = grad.add_mutually_exclusive_group()
    which.add_argument("--op", action="append", choices=sorted(REGISTRY), help="Check name (repeatable)")
    which.add_argument("--all", action="store_true", help="Run every registered check (default)")
    grad.add_argument("--eps", type=float, help="Finite-difference step (default HIRES_GRADCHECK_EPS)")
    grad.add_argument("--seed", type=int)
    grad.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds per check")
    grad.add_argument(
        "--max-coords", type=int, help="Check at most this many sampled coordinates per input (default: all)"
    )
    grad.set_defaults(handler=run_gradcheck)

    tok = subparsers.add_parser("tokens", help="Closed-form assembled sequence length")
    tok.add_argument("--grid", type=parse_grid, help="m,n")
    tok.add_argument("--per-slice", type=int, help="Tokens per slice L_s")
    tok.add_argument("--global", dest="lowres", type=int, help="Low-res view tokens L_0 (default L_s)")
    tok.add_argument("--separators", action="store_true")
    tok.add_argument("--table", action="store_true", help="Print the max-token table for the reference settings")
    tok.set_defaults(handler=run_tokens)
