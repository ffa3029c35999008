"""Caller context derivation and corpus-level token statistics.

A method c is a direct caller of target t when c contains a call site whose
simple name and argument count match t's name and arity. Resolution is a
deliberate lexical over-approximation: no type information is available, so
distinct methods sharing (name, arity) are flagged in resolution_notes
rather than disambiguated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .java_index import MethodRecord, ProjectIndex
from .tokens import count_tokens

__all__ = [
    "ContextPolicy",
    "CallContext",
    "CorpusStats",
    "UnknownMethodError",
    "EmptyIndexError",
    "callers_of",
    "context_stats",
    "resolve_method",
]

DEFAULT_CONTEXT_CAP = 10


class UnknownMethodError(KeyError):
    pass


class EmptyIndexError(ValueError):
    pass


@dataclass(frozen=True)
class ContextPolicy:
    cap: int = DEFAULT_CONTEXT_CAP


@dataclass
class CallContext:
    target_id: str
    caller_ids: list[str] = field(default_factory=list)
    truncated: bool = False
    resolution_notes: list[str] = field(default_factory=list)


@dataclass
class CorpusStats:
    mean_tokens_per_method: float
    max_tokens_per_method: int
    min_tokens_per_method: int
    mean_summary_tokens: float | None
    mean_context_size: float
    tokenizer: str = "fallback"
    approximate: bool = True

    def to_dict(self) -> dict:
        return {
            "mean_tokens_per_method": self.mean_tokens_per_method,
            "max_tokens_per_method": self.max_tokens_per_method,
            "min_tokens_per_method": self.min_tokens_per_method,
            "mean_summary_tokens": self.mean_summary_tokens,
            "mean_context_size": self.mean_context_size,
            "tokenizer": self.tokenizer,
            "approximate": self.approximate,
        }


def resolve_method(idx: ProjectIndex, key: str) -> MethodRecord:
    """Look a method up by id or by qualified name."""
    rec = idx.methods.get(key)
    if rec is not None:
        return rec
    matches = [m for m in idx.methods.values() if m.qualified_name == key]
    if not matches:
        raise UnknownMethodError(f"no method with id or qualified name {key!r}")
    if len(matches) > 1:
        raise UnknownMethodError(
            f"qualified name {key!r} is ambiguous ({len(matches)} overloads); "
            "use the method_id"
        )
    return matches[0]


def callers_of(
    idx: ProjectIndex, target: str, policy: ContextPolicy | None = None
) -> CallContext:
    """Direct callers of the target method, ordered by (file, start line),
    capped at policy.cap. Self-recursive sites are excluded."""
    policy = policy or ContextPolicy()
    rec = idx.methods.get(target)
    if rec is None:
        raise UnknownMethodError(f"unknown method id {target!r}")
    notes: list[str] = []
    twins = [
        m.method_id
        for m in idx.methods.values()
        if m.simple_name == rec.simple_name
        and m.arity == rec.arity
        and m.method_id != rec.method_id
    ]
    if twins:
        notes.append(
            f"{len(twins)} other method(s) share (name={rec.simple_name!r}, "
            f"arity={rec.arity}); callers are matched lexically and may "
            "over-approximate"
        )
    seen: set[str] = set()
    caller_ids: list[str] = []
    for site in idx.call_sites:
        if site.callee_name != rec.simple_name or site.arg_count != rec.arity:
            continue
        if site.caller_id == rec.method_id or site.caller_id in seen:
            continue
        seen.add(site.caller_id)
        caller_ids.append(site.caller_id)
    caller_ids.sort(key=lambda mid: (idx.methods[mid].file, idx.methods[mid].line_span[0]))
    truncated = len(caller_ids) > policy.cap
    if truncated:
        caller_ids = caller_ids[: policy.cap]
    return CallContext(
        target_id=rec.method_id,
        caller_ids=caller_ids,
        truncated=truncated,
        resolution_notes=notes,
    )


def context_stats(
    idx: ProjectIndex,
    contexts: list[CallContext],
    summaries=None,
    tokenizer=None,
) -> CorpusStats:
    """Token means/extrema over retained methods, mean context size over the
    supplied contexts, and mean summary-token count when summaries are given."""
    if not idx.methods:
        raise EmptyIndexError("cannot compute statistics over an empty index")
    counts = [m.token_count for m in idx.methods.values()]
    mean_summary = None
    if summaries:
        summary_counts = [
            count_tokens(s.final_summary, tokenizer) for s in summaries
        ]
        mean_summary = sum(summary_counts) / len(summary_counts)
    mean_context = (
        sum(len(c.caller_ids) for c in contexts) / len(contexts) if contexts else 0.0
    )
    return CorpusStats(
        mean_tokens_per_method=sum(counts) / len(counts),
        max_tokens_per_method=max(counts),
        min_tokens_per_method=min(counts),
        mean_summary_tokens=mean_summary,
        mean_context_size=mean_context,
        tokenizer=idx.meta.get("tokenizer", "fallback"),
        approximate=idx.meta.get("approximate_tokens", True),
    )
