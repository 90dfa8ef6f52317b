"""CLI: train the utility regressor, batch-score pair files, serve scores."""

from __future__ import annotations

import argparse
import logging
import sys

from .data import DataError
from .train import TrainerConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="utility-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune on a pointwise JSONL file")
    p.add_argument("--data", required=True, help="pointwise training JSONL")
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--wd", type=float, default=0.01, help="weight decay")
    p.add_argument("--warmup", type=float, default=0.1, help="warmup ratio")
    p.add_argument("--bs", type=int, default=8, help="per-device batch size")
    p.add_argument("--accum", type=int, default=2, help="gradient accumulation steps")
    p.add_argument("--lr", type=float, default=2e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoder", default="tiny", help="'tiny' or 'hf:<model>'")
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--fp16", action="store_true", help="mixed-precision (CUDA only)")

    p = sub.add_parser("score", help="score a {question_id,passage_id,question,passage} file")
    p.add_argument("--model", required=True, help="artifact directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)

    p = sub.add_parser("serve", help="run the scoring HTTP service")
    p.add_argument("--model", required=True, help="artifact directory")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def cmd_train(args) -> int:
    config = TrainerConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.wd,
        warmup_ratio=args.warmup,
        batch_size=args.bs,
        grad_accum=args.accum,
        mixed_precision=args.fp16,
        seed=args.seed,
        encoder=args.encoder,
        max_length=args.max_length,
    )
    out_dir, summary = train(args.data, args.out, config)
    print(
        f"trained on {summary.examples} examples for {config.epochs} epochs; "
        f"final epoch MSE {summary.final_loss:.5f}; artifact -> {out_dir}"
    )
    return 0


def cmd_score(args) -> int:
    from .score import score_file

    count = score_file(args.model, args.input, args.output)
    print(f"scored {count} pairs -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(args.model), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "score": cmd_score, "serve": cmd_serve}
    try:
        return handlers[args.command](args)
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
