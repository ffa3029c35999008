"""Command-line interface for the summarization toolchain."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .backend import Backend, builtin_mock_config, load_backend_configs
from .callgraph import ContextPolicy, callers_of, context_stats, resolve_method
from .java_index import ScanConfig, load_index, scan_project, write_index
from .pipeline import (
    PipelinePolicy,
    build_distill_dataset,
    make_loo_splits,
    read_exemplar_ids,
    summarize_batch,
    write_splits,
    write_summaries,
)
from .evalstats import (
    analyze_experiment,
    load_likert,
    load_participants,
    load_preferences,
    qc_filter,
)
from .tokens import BpeTokenizer, default_tokenizer


def _tokenizer_from_args(args):
    if getattr(args, "bpe_vocab", None) and getattr(args, "bpe_merges", None):
        return BpeTokenizer.from_files(args.bpe_vocab, args.bpe_merges)
    return default_tokenizer()


def _backend_from_args(args, name: str) -> Backend:
    if name == "mock":
        return Backend(builtin_mock_config())
    if not getattr(args, "backends", None):
        raise SystemExit(
            f"backend {name!r} requires --backends pointing at a config file"
        )
    configs = load_backend_configs(args.backends)
    if name not in configs:
        raise SystemExit(f"backend {name!r} not found in {args.backends}")
    return Backend(configs[name])


def _cmd_index(args) -> int:
    cfg = ScanConfig(
        keep_comments=args.keep_comments,
        dedup=not args.no_dedup,
        tokenizer=_tokenizer_from_args(args),
    )
    idx = scan_project(args.root, cfg)
    write_index(idx, args.out)
    failed = [f.path for f in idx.files if f.parse_status.startswith("failed")]
    print(
        f"indexed {len(idx.methods)} methods from {len(idx.files)} files "
        f"({len(idx.dedup_report)} duplicates dropped, {len(failed)} files failed)"
    )
    for path in failed:
        print(f"  failed: {path}", file=sys.stderr)
    return 0


def _cmd_context(args) -> int:
    idx = load_index(args.index)
    rec = resolve_method(idx, args.target)
    context = callers_of(idx, rec.method_id, ContextPolicy(cap=args.cap))
    print(
        json.dumps(
            {
                "target_id": context.target_id,
                "caller_ids": context.caller_ids,
                "truncated": context.truncated,
                "resolution_notes": context.resolution_notes,
            },
            indent=2,
        )
    )
    return 0


def _cmd_stats(args) -> int:
    idx = load_index(args.index)
    policy = ContextPolicy(cap=args.cap)
    contexts = [callers_of(idx, mid, policy) for mid in idx.methods]
    stats = context_stats(idx, contexts)
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


def _read_targets(args, idx) -> list[str]:
    if args.targets:
        lines = Path(args.targets).read_text(encoding="utf-8").splitlines()
        return [
            resolve_method(idx, line.strip()).method_id
            for line in lines
            if line.strip()
        ]
    return list(idx.methods)


def _cmd_summarize(args) -> int:
    idx = load_index(args.index)
    why_backend = _backend_from_args(args, args.backend)
    caller_backend = _backend_from_args(args, args.caller_backend or args.backend)
    policy = PipelinePolicy(
        context=ContextPolicy(cap=args.cap),
        batched_callers=args.batched_callers,
    )
    tokenizer = _tokenizer_from_args(args)
    targets = _read_targets(args, idx)
    records, failures = summarize_batch(
        idx, targets, args.process, caller_backend, why_backend, policy, tokenizer
    )
    write_summaries(records, args.out)
    print(f"wrote {len(records)} records to {args.out} ({failures} failed)")
    return 0 if failures == 0 else 1


def _cmd_distill(args) -> int:
    idx = load_index(args.index)
    why_backend = _backend_from_args(args, args.backend)
    caller_backend = _backend_from_args(args, args.caller_backend or args.backend)
    policy = PipelinePolicy(
        context=ContextPolicy(cap=args.cap),
        batched_callers=args.batched_callers,
        context_only=args.context_only,
    )
    stats = build_distill_dataset(
        idx, caller_backend, why_backend, policy, args.out, _tokenizer_from_args(args)
    )
    print(
        f"distill dataset {args.out}: written={stats.written} "
        f"skipped={stats.skipped} failed={stats.failed}"
    )
    return 0 if stats.failed == 0 else 1


def _cmd_split(args) -> int:
    ids = read_exemplar_ids(args.exemplars)
    splits = make_loo_splits(ids)
    paths = write_splits(splits, args.out)
    print(f"wrote {len(paths)} split files to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    likert = load_likert(args.likert)
    prefs = load_preferences(args.prefs)
    participants = load_participants(args.participants)
    likert, likert_report = qc_filter(likert, participants)
    prefs, prefs_report = qc_filter(prefs, participants)

    experiment_ids = sorted(
        {r.experiment_id for r in likert} | {r.experiment_id for r in prefs}
    )
    reports = []
    for experiment_id in experiment_ids:
        reports.append(
            analyze_experiment(
                [r for r in likert if r.experiment_id == experiment_id],
                [r for r in prefs if r.experiment_id == experiment_id],
                alpha=args.alpha,
            )
        )
    payload = {
        "qc": {"likert": likert_report, "preferences": prefs_report},
        "experiments": [r.to_dict() for r in reports],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for report in reports:
        print(
            f"experiment {report.experiment_id}: winner={report.winner} "
            f"p={report.p_two_sided:.4g} ({report.method})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxsum",
        description="Context-aware Java method summarization toolchain",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="scan a Java source tree into an index")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--keep-comments", action="store_true")
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--bpe-vocab")
    p.add_argument("--bpe-merges")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("context", help="print the call context of a method")
    p.add_argument("index")
    p.add_argument("--target", required=True, help="method_id or qualified name")
    p.add_argument("--cap", type=int, default=10)
    p.set_defaults(func=_cmd_context)

    p = sub.add_parser("stats", help="print corpus statistics for an index")
    p.add_argument("index")
    p.add_argument("--cap", type=int, default=10)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("summarize", help="summarize methods with one process")
    p.add_argument("--process", choices=["p1", "p2", "p3"], required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--backends", help="TOML/JSON backend config file")
    p.add_argument("--caller-backend")
    p.add_argument("--batched-callers", action="store_true")
    p.add_argument("--targets", help="file of method ids or qualified names")
    p.add_argument("--cap", type=int, default=10)
    p.add_argument("--bpe-vocab")
    p.add_argument("--bpe-merges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("distill", help="build a distillation training dataset")
    p.add_argument("--index", required=True)
    p.add_argument("--backend", default="mock")
    p.add_argument("--backends")
    p.add_argument("--caller-backend")
    p.add_argument("--batched-callers", action="store_true")
    p.add_argument("--context-only", action="store_true")
    p.add_argument("--cap", type=int, default=10)
    p.add_argument("--bpe-vocab")
    p.add_argument("--bpe-merges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("split", help="generate leave-one-out splits")
    p.add_argument("--exemplars", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("analyze", help="analyze study response files")
    p.add_argument("--likert", required=True)
    p.add_argument("--prefs", required=True)
    p.add_argument("--participants", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
