"""Prompt rendering with token counting and window-budget enforcement.

The canonical template strings live in templates.toml next to this module
and render byte-exactly (golden-tested). Small-model prompts (the TDAT
forms) are fitted to a token budget by dropping whole descriptions from the
end of the list first and then truncating the tail of the target source.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import tomli

from .tokens import count_tokens, default_tokenizer

__all__ = [
    "RenderedPrompt",
    "TokenBudget",
    "PromptError",
    "BudgetError",
    "CALLER_SOURCE_SEPARATOR",
    "DESCRIPTION_SEPARATOR",
    "templates",
    "render_caller_descriptions_prompt",
    "render_why_prompt",
    "render_tdat_prompt",
    "render_tdat_context_prompt",
    "render_project_prompt",
    "count_tokens",
]

# caller sources inside the commercial context prompt
CALLER_SOURCE_SEPARATOR = "\n---\n"
# caller descriptions inside the TDAT-CONTEXT prompt
DESCRIPTION_SEPARATOR = "\n"


class PromptError(ValueError):
    pass


class BudgetError(PromptError):
    """The prompt cannot be made to fit the window even fully truncated."""


@dataclass(frozen=True)
class TokenBudget:
    window: int = 1024
    reserved_for_output: int = 64

    def __post_init__(self):
        if self.reserved_for_output >= self.window:
            raise ValueError("reserved_for_output must be smaller than window")

    @property
    def prompt_limit(self) -> int:
        return self.window - self.reserved_for_output


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    token_count: int
    truncated: bool
    template_id: str


def _load_templates() -> dict[str, str]:
    data = (
        importlib.resources.files("ctxsum").joinpath("templates.toml").read_bytes()
    )
    return tomli.loads(data.decode("utf-8"))["templates"]


_TEMPLATES = _load_templates()

_PLACEHOLDERS = {
    "caller_descriptions": ["{context}"],
    "why": ["{target code}", "{descriptions}"],
    "tdat": ["{target}"],
    "tdat_context": ["{target}", "{descriptions}"],
    "project_baseline": ["{target code}", "{project}"],
}


def _split_template(template_id: str) -> list[str]:
    """Split a template at its placeholders, verifying each occurs exactly
    once and in order. Returns len(placeholders)+1 literal segments."""
    text = _TEMPLATES[template_id]
    segments = []
    for placeholder in _PLACEHOLDERS[template_id]:
        if text.count(placeholder) != 1:
            raise PromptError(
                f"template {template_id!r} must contain {placeholder} exactly once"
            )
        before, text = text.split(placeholder, 1)
        segments.append(before)
    segments.append(text)
    return segments


_SEGMENTS = {tid: _split_template(tid) for tid in _PLACEHOLDERS}


def templates() -> dict[str, str]:
    """The canonical template strings keyed by template id."""
    return dict(_TEMPLATES)


def _fill(template_id: str, *payloads: str) -> str:
    segments = _SEGMENTS[template_id]
    out = [segments[0]]
    for payload, segment in zip(payloads, segments[1:]):
        out.append(payload)
        out.append(segment)
    return "".join(out)


def render_caller_descriptions_prompt(
    caller_sources: list[str], tokenizer=None
) -> RenderedPrompt:
    """Commercial-path prompt asking for a description of every caller.
    No budget applies."""
    if not caller_sources:
        raise PromptError(
            "caller_sources must be non-empty; use the no-context fallback instead"
        )
    text = _fill("caller_descriptions", CALLER_SOURCE_SEPARATOR.join(caller_sources))
    return RenderedPrompt(
        text=text,
        token_count=count_tokens(text, tokenizer),
        truncated=False,
        template_id="caller_descriptions",
    )


def render_why_prompt(
    target_source: str, descriptions: str, tokenizer=None
) -> RenderedPrompt:
    """Commercial-path prompt asking why the target method is used."""
    if not target_source:
        raise PromptError("target_source must be non-empty")
    if not descriptions:
        raise PromptError("descriptions must be non-empty")
    text = _fill("why", target_source, descriptions)
    return RenderedPrompt(
        text=text,
        token_count=count_tokens(text, tokenizer),
        truncated=False,
        template_id="why",
    )


def _truncate_target_to_fit(build, target: str, limit: int, tokenizer) -> tuple[str, str]:
    """Shrink the target tail until build(target) fits in limit tokens."""
    text = build(target)
    while count_tokens(text, tokenizer) > limit:
        if not target:
            raise BudgetError(
                f"prompt exceeds the {limit}-token budget even with an empty target"
            )
        over = count_tokens(text, tokenizer) - limit
        cut = max(1, min(len(target), over))
        target = target[:-cut]
        text = build(target)
    return target, text


def render_tdat_prompt(
    target_source: str, tokenizer=None, budget: TokenBudget | None = TokenBudget()
) -> RenderedPrompt:
    """Small-model single-method prompt; budget enforced with target-tail
    truncation."""
    tokenizer = tokenizer or default_tokenizer()
    build = lambda target: _fill("tdat", target)
    text = build(target_source)
    truncated = False
    if budget is not None and count_tokens(text, tokenizer) > budget.prompt_limit:
        _, text = _truncate_target_to_fit(
            build, target_source, budget.prompt_limit, tokenizer
        )
        truncated = True
    return RenderedPrompt(
        text=text,
        token_count=count_tokens(text, tokenizer),
        truncated=truncated,
        template_id="tdat",
    )


def render_tdat_context_prompt(
    target_source: str,
    descriptions: list[str],
    summary: str | None = None,
    tokenizer=None,
    budget: TokenBudget | None = TokenBudget(),
) -> RenderedPrompt:
    """Small-model context prompt.

    With a summary the training serialization is produced (summary follows
    the SUMMARY header); without one the inference serialization ends after
    the SUMMARY header. An empty description list degrades to the plain
    single-method shape. Budget enforcement drops whole descriptions from
    the end of the list first, then truncates the target tail.
    """
    tokenizer = tokenizer or default_tokenizer()
    suffix = summary if summary is not None else ""

    def build(target: str, descs: list[str]) -> str:
        if descs:
            body = _fill("tdat_context", target, DESCRIPTION_SEPARATOR.join(descs))
        else:
            body = _fill("tdat", target)
        return body + suffix

    kept = list(descriptions)
    text = build(target_source, kept)
    truncated = False
    if budget is not None:
        limit = budget.prompt_limit
        while count_tokens(text, tokenizer) > limit and kept:
            kept.pop()
            truncated = True
            text = build(target_source, kept)
        if count_tokens(text, tokenizer) > limit:
            _, text = _truncate_target_to_fit(
                lambda target: build(target, kept), target_source, limit, tokenizer
            )
            truncated = True
    return RenderedPrompt(
        text=text,
        token_count=count_tokens(text, tokenizer),
        truncated=truncated,
        template_id="tdat_context" if kept else "tdat",
    )


def render_project_prompt(
    target_source: str, all_method_sources: list[str], tokenizer=None
) -> RenderedPrompt:
    """Whole-project baseline prompt: target first, then every other method
    in index order. Intended for long-window backends; no budget applies."""
    project = CALLER_SOURCE_SEPARATOR.join(all_method_sources)
    text = _fill("project_baseline", target_source, project)
    return RenderedPrompt(
        text=text,
        token_count=count_tokens(text, tokenizer),
        truncated=False,
        template_id="project_baseline",
    )
