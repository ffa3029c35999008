"""Dataset loading for pipeline-format training files and split files.

Prompts are encoded at the byte level (ids 0..255) with a single extra id
serving as both end-of-sequence and padding, so no external vocabulary is
needed and offsets into the encoded sequence equal byte offsets into the
prompt text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .model import PAD_ID

SUMMARY_HEADER = b"SUMMARY\n"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class EncodedExample:
    method_id: str
    ids: list[int]
    summary_start: int      # index of the first token after the SUMMARY header


def encode_prompt(method_id: str, prompt: str) -> EncodedExample:
    raw = prompt.encode("utf-8")
    marker = raw.rfind(SUMMARY_HEADER)
    summary_start = marker + len(SUMMARY_HEADER) if marker != -1 else 0
    return EncodedExample(
        method_id=method_id,
        ids=list(raw) + [PAD_ID],
        summary_start=summary_start,
    )


def load_training_examples(path: str | Path) -> list[EncodedExample]:
    """Read a pipeline train.jsonl file; one serialized prompt per line."""
    examples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        try:
            examples.append(encode_prompt(obj["method_id"], obj["serialized_prompt"]))
        except KeyError as exc:
            raise DatasetError(f"training line missing field {exc}") from exc
    return examples


def load_split(path: str | Path) -> tuple[str | None, list[str]]:
    """Read one split file: (held_out_id, train_ids)."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return obj.get("held_out_id"), list(obj["train_ids"])


def filter_to_split(
    examples: list[EncodedExample], train_ids: list[str]
) -> list[EncodedExample]:
    allowed = set(train_ids)
    return [e for e in examples if e.method_id in allowed]
