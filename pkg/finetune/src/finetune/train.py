"""Seeded fine-tuning loop with gradient masking and atomic checkpoints."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import torch
from torch.nn import functional as F

from .config import ModelConfig, TrainConfig, TrainReport
from .data import EncodedExample, filter_to_split, load_split, load_training_examples
from .freeze import (
    apply_gradient_mask,
    build_freeze_plan,
    count_params,
    frozen_state_hash,
)
from .model import PAD_ID, Decoder

IGNORE_INDEX = -100


class TrainError(ValueError):
    pass


def _batches(examples: list[EncodedExample], batch_size: int, order: list[int]):
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start : start + batch_size]]


def _tensors(batch: list[EncodedExample], loss_scope: str):
    longest = max(len(e.ids) for e in batch)
    inputs = torch.full((len(batch), longest - 1), PAD_ID, dtype=torch.long)
    targets = torch.full((len(batch), longest - 1), IGNORE_INDEX, dtype=torch.long)
    for row, example in enumerate(batch):
        ids = torch.tensor(example.ids, dtype=torch.long)
        length = len(example.ids)
        inputs[row, : length - 1] = ids[:-1]
        targets[row, : length - 1] = ids[1:]
        if loss_scope == "summary_only":
            # positions predicting tokens before the summary carry no loss
            cutoff = max(example.summary_start - 1, 0)
            targets[row, :cutoff] = IGNORE_INDEX
    return inputs, targets


def _dataset_loss(model: Decoder, examples, batch_size: int, loss_scope: str) -> float:
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for batch in _batches(examples, batch_size, list(range(len(examples)))):
            inputs, targets = _tensors(batch, loss_scope)
            logits = model(inputs)
            loss = F.cross_entropy(
                logits.reshape(-1, logits.shape[-1]),
                targets.reshape(-1),
                ignore_index=IGNORE_INDEX,
                reduction="sum",
            )
            total += loss.item()
            count += int((targets != IGNORE_INDEX).sum().item())
    if count == 0:
        raise TrainError("no loss-bearing tokens in the dataset")
    return total / count


def _atomic_save(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        torch.save(payload, tmp_name)
        os.replace(tmp_name, path)
    finally:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)


def train(
    cfg: ModelConfig,
    train_cfg: TrainConfig,
    dataset_path: str | Path,
    split_path: str | Path | None = None,
    out_checkpoint: str | Path = "model.pt",
    zero_based_freeze: bool = False,
) -> TrainReport:
    """Fine-tune over the serialized prompts in dataset_path.

    A split file restricts training to its train_ids (the held-out example
    is never read into the batch stream). Over-window examples are skipped
    and counted. The run is fully seeded: a re-run with the same seed
    reproduces the final loss bit for bit.
    """
    if cfg.vocab_size < PAD_ID + 1:
        raise TrainError(
            f"byte-level training needs vocab_size >= {PAD_ID + 1}, "
            f"got {cfg.vocab_size}"
        )
    examples = load_training_examples(dataset_path)
    notes = []
    if split_path is not None:
        held_out, train_ids = load_split(split_path)
        examples = filter_to_split(examples, train_ids)
        notes.append(f"split applied: held_out={held_out!r}")
    usable = [e for e in examples if len(e.ids) <= cfg.window]
    skipped = len(examples) - len(usable)
    if not usable:
        raise TrainError("training set is empty after filtering")

    torch.manual_seed(train_cfg.seed)
    model = Decoder(cfg, dropout=train_cfg.dropout)
    plan = build_freeze_plan(cfg, zero_based=zero_based_freeze)
    apply_gradient_mask(plan, model)
    total, trainable, frozen = count_params(cfg, plan)
    hash_before = frozen_state_hash(plan, model)

    optimizer = torch.optim.AdamW(
        [p for p in model.parameters() if p.requires_grad],
        lr=train_cfg.learning_rate,
    )
    initial_loss = _dataset_loss(model, usable, train_cfg.batch_size, train_cfg.loss_scope)

    generator = torch.Generator().manual_seed(train_cfg.seed)
    steps = 0
    curve = []
    for _epoch in range(train_cfg.epochs):
        order = torch.randperm(len(usable), generator=generator).tolist()
        model.train()
        epoch_total = 0.0
        epoch_tokens = 0
        for batch in _batches(usable, train_cfg.batch_size, order):
            inputs, targets = _tensors(batch, train_cfg.loss_scope)
            logits = model(inputs)
            loss = F.cross_entropy(
                logits.reshape(-1, logits.shape[-1]),
                targets.reshape(-1),
                ignore_index=IGNORE_INDEX,
            )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            steps += 1
            tokens = int((targets != IGNORE_INDEX).sum().item())
            epoch_total += loss.item() * tokens
            epoch_tokens += tokens
        curve.append(epoch_total / max(epoch_tokens, 1))

    final_loss = _dataset_loss(model, usable, train_cfg.batch_size, train_cfg.loss_scope)
    hash_after = frozen_state_hash(plan, model)

    _atomic_save(
        {
            "model_state": model.state_dict(),
            "model_config": cfg.__dict__,
            "train_config": train_cfg.__dict__,
            "frozen_tensor_names": sorted(plan.frozen_tensor_names),
        },
        Path(out_checkpoint),
    )
    return TrainReport(
        initial_loss=initial_loss,
        final_loss=final_loss,
        loss_curve=curve,
        epochs=train_cfg.epochs,
        steps=steps,
        total_params=total,
        trainable_params=trainable,
        frozen_params=frozen,
        skipped_over_window=skipped,
        example_ids=[e.method_id for e in usable],
        frozen_hash_before=hash_before,
        frozen_hash_after=hash_after,
        seed=train_cfg.seed,
        notes=notes,
    )


def write_report(report: TrainReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
