"""Command-line interface: freeze plans, parameter reports, training runs."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ModelConfig, TrainConfig
from .freeze import build_freeze_plan, param_report
from .train import train, write_report


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        n_blocks=args.n_blocks,
        d_model=args.d_model,
        vocab_size=args.vocab_size,
        window=args.window,
        tied_output_embedding=not args.untied_output,
    )


def _add_model_args(parser, toy_defaults: bool = False):
    parser.add_argument("--n-blocks", type=int, default=4 if toy_defaults else 24)
    parser.add_argument("--d-model", type=int, default=64 if toy_defaults else 1024)
    parser.add_argument("--vocab-size", type=int, default=257 if toy_defaults else 50257)
    parser.add_argument("--window", type=int, default=256 if toy_defaults else 1024)
    parser.add_argument("--untied-output", action="store_true")


def _cmd_plan(args) -> int:
    cfg = _model_config(args)
    plan = build_freeze_plan(cfg, zero_based=args.zero_based)
    print(param_report(cfg, plan))
    return 0


def _cmd_train(args) -> int:
    cfg = _model_config(args)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        dropout=args.dropout,
        loss_scope=args.loss_scope,
        seed=args.seed,
    )
    report = train(
        cfg,
        train_cfg,
        dataset_path=args.dataset,
        split_path=args.split,
        out_checkpoint=args.out_checkpoint,
        zero_based_freeze=args.zero_based,
    )
    write_report(report, args.report)
    reduction = (
        (report.initial_loss - report.final_loss) / report.initial_loss
        if report.initial_loss
        else 0.0
    )
    print(
        f"loss {report.initial_loss:.4f} -> {report.final_loss:.4f} "
        f"({100 * reduction:.1f}% reduction), trainable "
        f"{report.trainable_params:,}/{report.total_params:,}, "
        f"skipped {report.skipped_over_window} over-window examples"
    )
    assert report.frozen_hash_before == report.frozen_hash_after
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxsum-finetune",
        description="Weight-freezing fine-tuning on ctxsum training datasets",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the freeze plan and parameter report")
    _add_model_args(p)
    p.add_argument("--zero-based", action="store_true")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("train", help="fine-tune on a pipeline train.jsonl")
    _add_model_args(p, toy_defaults=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", help="one split JSON from the pipeline's splits/")
    p.add_argument("--out-checkpoint", default="model.pt")
    p.add_argument("--report", default="report.json")
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--loss-scope", choices=["full_sequence", "summary_only"],
                   default="full_sequence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-based", action="store_true")
    p.set_defaults(func=_cmd_train)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
