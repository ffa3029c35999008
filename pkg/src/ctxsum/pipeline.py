"""Orchestration of the three summarization processes, distillation dataset
construction, and leave-one-out split generation.

Process 1 summarizes from the target method alone, Process 2 from the target
plus the rest of the project, and Process 3 from the target plus generated
summaries of its direct callers. With mock backends every output file is
byte-deterministic; timestamps are pinned to the epoch in that case.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .backend import Backend, BackendConfig, BackendError
from .callgraph import CallContext, ContextPolicy, callers_of, resolve_method
from .java_index import MethodRecord, ProjectIndex
from .promptgen import (
    RenderedPrompt,
    render_caller_descriptions_prompt,
    render_project_prompt,
    render_tdat_context_prompt,
    render_tdat_prompt,
    render_why_prompt,
)

__all__ = [
    "SummaryRecord",
    "TrainingExample",
    "SplitSpec",
    "DatasetStats",
    "PipelinePolicy",
    "PipelineError",
    "CapExceededError",
    "summarize_p1",
    "summarize_p2",
    "summarize_p3",
    "summarize_batch",
    "build_distill_dataset",
    "make_loo_splits",
    "write_summaries",
    "read_training_examples",
    "read_exemplar_ids",
    "write_splits",
]

FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"
PROJECT_TOKEN_CAP = 120_000
WHY_PREFIX = "This method is used to"


class PipelineError(Exception):
    pass


class CapExceededError(PipelineError):
    """Project prompt exceeds the hard token cap; no request was issued."""


@dataclass
class PipelinePolicy:
    context: ContextPolicy = field(default_factory=ContextPolicy)
    batched_callers: bool = False     # one Template-A request instead of per-caller prompts
    context_only: bool = False        # distill only methods with a non-empty context
    project_token_cap: int = PROJECT_TOKEN_CAP


@dataclass
class SummaryRecord:
    method_id: str
    process: str                      # "p1" | "p2" | "p3"
    backend_name: str
    caller_summaries: list[tuple[str, str]]
    final_summary: str
    prompt_hash: str
    created_at: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "process": self.process,
            "backend_name": self.backend_name,
            "caller_summaries": [list(pair) for pair in self.caller_summaries],
            "final_summary": self.final_summary,
            "prompt_hash": self.prompt_hash,
            "created_at": self.created_at,
            "warnings": list(self.warnings),
        }


@dataclass
class TrainingExample:
    method_id: str
    target_source: str
    descriptions: list[str]
    summary: str
    serialized_prompt: str

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "target_source": self.target_source,
            "descriptions": list(self.descriptions),
            "summary": self.summary,
            "serialized_prompt": self.serialized_prompt,
        }


@dataclass
class SplitSpec:
    held_out_id: str | None           # None marks the extra full split
    train_ids: list[str]


@dataclass
class DatasetStats:
    written: int = 0
    skipped: int = 0
    failed: int = 0


def _as_backend(backend) -> Backend:
    if isinstance(backend, Backend):
        return backend
    if isinstance(backend, BackendConfig):
        return Backend(backend)
    raise TypeError(f"expected Backend or BackendConfig, got {type(backend)!r}")


def _timestamp(*backends: Backend) -> str:
    if all(b.cfg.kind == "mock" for b in backends):
        return FIXED_TIMESTAMP
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _prompt_hash(prompt: RenderedPrompt) -> str:
    return hashlib.sha256(prompt.text.encode("utf-8")).hexdigest()[:16]


def _source_warnings(rec: MethodRecord) -> list[str]:
    warnings = []
    if not rec.source_text.strip():
        warnings.append("empty method source")
    else:
        open_idx = rec.source_text.find("{")
        close_idx = rec.source_text.rfind("}")
        if open_idx != -1 and close_idx > open_idx:
            if not rec.source_text[open_idx + 1 : close_idx].strip():
                warnings.append("empty method body")
    return warnings


def _render_single_method_prompt(rec: MethodRecord, backend: Backend, tokenizer):
    # http backends take the free-form description request; small-model
    # backends take the TDAT form
    if backend.cfg.kind == "http":
        return render_caller_descriptions_prompt([rec.source_text], tokenizer)
    return render_tdat_prompt(rec.source_text, tokenizer)


def summarize_p1(idx: ProjectIndex, target: str, backend, tokenizer=None) -> SummaryRecord:
    """Summary from the target method alone."""
    backend = _as_backend(backend)
    rec = resolve_method(idx, target)
    prompt = _render_single_method_prompt(rec, backend, tokenizer)
    result = backend.complete(prompt)
    return SummaryRecord(
        method_id=rec.method_id,
        process="p1",
        backend_name=backend.cfg.name or backend.cfg.kind,
        caller_summaries=[],
        final_summary=result.text,
        prompt_hash=_prompt_hash(prompt),
        created_at=_timestamp(backend),
        warnings=_source_warnings(rec) + result.warnings,
    )


def summarize_p2(
    idx: ProjectIndex,
    target: str,
    backend,
    tokenizer=None,
    token_cap: int | None = None,
) -> SummaryRecord:
    """Summary from the target plus the rest of the project in one prompt."""
    backend = _as_backend(backend)
    if not backend.cfg.long_window:
        raise PipelineError(
            f"backend {backend.cfg.name or backend.cfg.kind!r} is not declared "
            "long-window capable"
        )
    rec = resolve_method(idx, target)
    others = [
        m.source_text for mid, m in idx.methods.items() if mid != rec.method_id
    ]
    prompt = render_project_prompt(rec.source_text, others, tokenizer)
    cap = token_cap if token_cap is not None else PROJECT_TOKEN_CAP
    if prompt.token_count > cap:
        raise CapExceededError(
            f"project prompt is {prompt.token_count} tokens, above the cap of {cap}"
        )
    result = backend.complete(prompt)
    return SummaryRecord(
        method_id=rec.method_id,
        process="p2",
        backend_name=backend.cfg.name or backend.cfg.kind,
        caller_summaries=[],
        final_summary=result.text,
        prompt_hash=_prompt_hash(prompt),
        created_at=_timestamp(backend),
        warnings=_source_warnings(rec) + result.warnings,
    )


def _summarize_callers(
    context: CallContext,
    idx: ProjectIndex,
    backend: Backend,
    batched: bool,
    tokenizer,
) -> tuple[list[tuple[str, str]], list[str]]:
    callers = [idx.methods[cid] for cid in context.caller_ids]
    warnings: list[str] = []
    pairs: list[tuple[str, str]] = []
    if batched:
        prompt = render_caller_descriptions_prompt(
            [c.source_text for c in callers], tokenizer
        )
        result = backend.complete(prompt)
        lines = [line for line in result.text.split("\n") if line.strip()]
        if len(lines) != len(callers):
            warnings.append(
                f"batched caller response had {len(lines)} descriptions for "
                f"{len(callers)} callers; pairing the overlap"
            )
        pairs = list(zip((c.method_id for c in callers), lines))
    else:
        for caller in callers:
            prompt = render_tdat_prompt(caller.source_text, tokenizer)
            try:
                result = backend.complete(prompt)
            except BackendError as exc:
                warnings.append(f"caller {caller.method_id} summary failed: {exc}")
                continue
            pairs.append((caller.method_id, result.text))
    return pairs, warnings


def summarize_p3(
    idx: ProjectIndex,
    target: str,
    caller_backend,
    why_backend,
    policy: PipelinePolicy | None = None,
    tokenizer=None,
) -> SummaryRecord:
    """Caller-context summary: summarize each direct caller, then condition
    the final summary on the target and those caller summaries."""
    policy = policy or PipelinePolicy()
    caller_backend = _as_backend(caller_backend)
    why_backend = _as_backend(why_backend)
    rec = resolve_method(idx, target)
    context = callers_of(idx, rec.method_id, policy.context)

    if not context.caller_ids:
        record = summarize_p1(idx, rec.method_id, why_backend, tokenizer)
        record.process = "p3"
        record.warnings = (
            list(context.resolution_notes)
            + ["empty call context; fell back to single-method prompt"]
            + record.warnings
        )
        return record

    warnings = _source_warnings(rec) + list(context.resolution_notes)
    caller_summaries, caller_warnings = _summarize_callers(
        context, idx, caller_backend, policy.batched_callers, tokenizer
    )
    warnings.extend(caller_warnings)
    descriptions = [text for _, text in caller_summaries]

    if why_backend.cfg.kind == "http":
        prompt = render_why_prompt(
            rec.source_text, "\n".join(descriptions), tokenizer
        )
    else:
        prompt = render_tdat_context_prompt(
            rec.source_text, descriptions, None, tokenizer
        )
    result = why_backend.complete(prompt)
    if not result.text.startswith(WHY_PREFIX):
        warnings.append(f'final summary does not start with "{WHY_PREFIX}"')
    return SummaryRecord(
        method_id=rec.method_id,
        process="p3",
        backend_name=why_backend.cfg.name or why_backend.cfg.kind,
        caller_summaries=caller_summaries,
        final_summary=result.text,
        prompt_hash=_prompt_hash(prompt),
        created_at=_timestamp(caller_backend, why_backend),
        warnings=warnings + result.warnings,
    )


def summarize_batch(
    idx: ProjectIndex,
    targets: list[str],
    process: str,
    caller_backend,
    why_backend,
    policy: PipelinePolicy | None = None,
    tokenizer=None,
) -> tuple[list[SummaryRecord], int]:
    """Run one process over many targets with a bounded worker pool.

    Backend failures produce error records (empty summary, warning) instead
    of aborting the batch; returns (records in input order, failure count).
    """
    policy = policy or PipelinePolicy()
    caller_backend = _as_backend(caller_backend)
    why_backend = _as_backend(why_backend)

    def one(target: str) -> SummaryRecord:
        if process == "p1":
            return summarize_p1(idx, target, why_backend, tokenizer)
        if process == "p2":
            return summarize_p2(
                idx, target, why_backend, tokenizer, policy.project_token_cap
            )
        if process == "p3":
            return summarize_p3(
                idx, target, caller_backend, why_backend, policy, tokenizer
            )
        raise PipelineError(f"unknown process {process!r}")

    def guarded(target: str) -> SummaryRecord:
        try:
            return one(target)
        except (BackendError, PipelineError) as exc:
            rec = resolve_method(idx, target)
            return SummaryRecord(
                method_id=rec.method_id,
                process=process,
                backend_name=why_backend.cfg.name or why_backend.cfg.kind,
                caller_summaries=[],
                final_summary="",
                prompt_hash="",
                created_at=_timestamp(caller_backend, why_backend),
                warnings=[f"error: {exc}"],
            )

    workers = max(caller_backend.cfg.parallelism, why_backend.cfg.parallelism)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(guarded, targets))
    failures = sum(1 for r in records if any(w.startswith("error:") for w in r.warnings))
    return records, failures


# ---------------------------------------------------------------------------
# Distillation dataset


def _jsonl(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def build_distill_dataset(
    idx: ProjectIndex,
    caller_backend,
    why_backend,
    policy: PipelinePolicy | None = None,
    out_path: str | Path = "train.jsonl",
    tokenizer=None,
) -> DatasetStats:
    """Run the caller-context recipe over every retained method and write one
    training example per line. Restarting skips method_ids already present,
    so an interrupted run resumes to the identical file."""
    policy = policy or PipelinePolicy()
    caller_backend = _as_backend(caller_backend)
    why_backend = _as_backend(why_backend)
    out_path = Path(out_path)
    stats = DatasetStats()

    existing: set[str] = set()
    if out_path.exists():
        for line in out_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            existing.add(json.loads(line)["method_id"])

    targets: list[MethodRecord] = []
    for rec in idx.methods.values():
        if policy.context_only:
            if not callers_of(idx, rec.method_id, policy.context).caller_ids:
                continue
        targets.append(rec)

    def one(rec: MethodRecord) -> TrainingExample | None:
        try:
            summary = summarize_p3(
                idx, rec.method_id, caller_backend, why_backend, policy, tokenizer
            )
        except (BackendError, PipelineError):
            return None
        descriptions = [text for _, text in summary.caller_summaries]
        serialized = render_tdat_context_prompt(
            rec.source_text, descriptions, summary.final_summary, tokenizer
        ).text
        return TrainingExample(
            method_id=rec.method_id,
            target_source=rec.source_text,
            descriptions=descriptions,
            summary=summary.final_summary,
            serialized_prompt=serialized,
        )

    pending = [rec for rec in targets if rec.method_id not in existing]
    stats.skipped = len(targets) - len(pending)
    workers = max(caller_backend.cfg.parallelism, why_backend.cfg.parallelism)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "a", encoding="utf-8") as fh:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for example in pool.map(one, pending):
                if example is None:
                    stats.failed += 1
                    continue
                fh.write(_jsonl(example.to_dict()) + "\n")
                fh.flush()
                stats.written += 1
    return stats


def read_training_examples(path: str | Path) -> list[TrainingExample]:
    examples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        examples.append(
            TrainingExample(
                method_id=obj["method_id"],
                target_source=obj["target_source"],
                descriptions=list(obj["descriptions"]),
                summary=obj["summary"],
                serialized_prompt=obj["serialized_prompt"],
            )
        )
    return examples


# ---------------------------------------------------------------------------
# Leave-one-out splits


def make_loo_splits(exemplar_ids: list[str]) -> list[SplitSpec]:
    """N ids produce N leave-one-out splits (hold out id i, train on the
    other N-1 in original order) plus one final full split over all N."""
    if len(set(exemplar_ids)) != len(exemplar_ids):
        raise PipelineError("exemplar ids must be unique")
    splits = [
        SplitSpec(held_out_id=held, train_ids=[i for i in exemplar_ids if i != held])
        for held in exemplar_ids
    ]
    splits.append(SplitSpec(held_out_id=None, train_ids=list(exemplar_ids)))
    return splits


def read_exemplar_ids(path: str | Path) -> list[str]:
    """Exemplar files are JSONL of {method_id, target_source, descriptions,
    summary}; ids are taken in file order."""
    ids = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        ids.append(json.loads(line)["method_id"])
    return ids


def write_splits(splits: list[SplitSpec], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(splits))))
    paths = []
    loo_index = 0
    for spec in splits:
        if spec.held_out_id is None:
            path = out_dir / "full.json"
        else:
            path = out_dir / f"loo_{loo_index:0{width}d}.json"
            loo_index += 1
        path.write_text(
            _jsonl({"held_out_id": spec.held_out_id, "train_ids": spec.train_ids})
            + "\n",
            encoding="utf-8",
        )
        paths.append(path)
    return paths


def write_summaries(records: list[SummaryRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_jsonl(record.to_dict()) + "\n")
