"""Secondary acceptance suite: freeze plan soundness, parameter accounting,
and trainability on a seeded toy model."""

import time
from contextlib import contextmanager

import torch

from finetune.config import ModelConfig, TrainConfig
from finetune.freeze import (
    apply_gradient_mask,
    build_freeze_plan,
    count_params,
    frozen_state_hash,
    param_report,
)
from finetune.model import Decoder
from finetune.train import train

from conftest import make_dataset


@contextmanager
def criterion(number: int, name: str, budget_seconds: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number} ({name}): FAIL")
        raise
    elapsed = time.perf_counter() - start
    if budget_seconds is not None and elapsed >= budget_seconds:
        print(
            f"[acceptance] criterion {number} ({name}): FAIL "
            f"(runtime {elapsed:.2f}s over the {budget_seconds:.0f}s budget)"
        )
        raise AssertionError(f"criterion {number} exceeded runtime budget")
    print(f"[acceptance] criterion {number} ({name}): PASS ({elapsed:.2f}s)")


def test_criterion_9_freeze_plan():
    with criterion(9, "freeze plan"):
        cfg = ModelConfig(n_blocks=24, d_model=1024, vocab_size=50257, window=1024)
        plan = build_freeze_plan(cfg)
        assert plan.frozen_blocks == {4, 8, 12, 16, 20, 24}
        assert "wte.weight" in plan.frozen_tensor_names
        assert "wpe.weight" in plan.frozen_tensor_names

        toy = ModelConfig(n_blocks=4, d_model=32, vocab_size=257, window=64)
        torch.manual_seed(42)
        model = Decoder(toy)
        toy_plan = build_freeze_plan(toy)
        apply_gradient_mask(toy_plan, model)
        before = frozen_state_hash(toy_plan, model)
        optimizer = torch.optim.AdamW(
            [p for p in model.parameters() if p.requires_grad], lr=1e-2
        )
        ids = torch.randint(0, 256, (2, 24))
        for _step in range(3):
            logits = model(ids)
            loss = torch.nn.functional.cross_entropy(
                logits[:, :-1].reshape(-1, logits.shape[-1]),
                ids[:, 1:].reshape(-1),
            )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        assert frozen_state_hash(toy_plan, model) == before


def test_criterion_10_parameter_accounting():
    with criterion(10, "parameter accounting"):
        # hand-summed table: see tests/test_count.py for the line items
        toy = ModelConfig(n_blocks=4, d_model=8, vocab_size=16, window=8)
        total, trainable, frozen = count_params(toy, build_freeze_plan(toy))
        assert (total, trainable, frozen) == (3696, 2632, 1064)

        reference = ModelConfig(
            n_blocks=24, d_model=1024, vocab_size=50257, window=1024
        )
        plan = build_freeze_plan(reference)
        ref_total, ref_trainable, _ = count_params(reference, plan)
        assert 340e6 < ref_total < 360e6
        report = param_report(reference, plan)
        assert "~350m" in report
        assert f"{ref_trainable:,}" in report
        assert "75m" in report
        assert "inconsistent" in report


def test_criterion_11_trainability(tmp_path):
    with criterion(11, "trainability", budget_seconds=120.0):
        dataset = tmp_path / "train.jsonl"
        make_dataset(dataset, count=20)
        cfg = ModelConfig(n_blocks=4, d_model=32, vocab_size=257, window=192)
        train_cfg = TrainConfig(epochs=4, batch_size=4, learning_rate=1e-3, seed=7)
        report = train(cfg, train_cfg, dataset, out_checkpoint=tmp_path / "a.pt")
        reduction = (report.initial_loss - report.final_loss) / report.initial_loss
        assert reduction >= 0.20, f"loss reduction only {100 * reduction:.1f}%"

        again = train(cfg, train_cfg, dataset, out_checkpoint=tmp_path / "b.pt")
        assert again.final_loss == report.final_loss
