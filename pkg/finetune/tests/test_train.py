import json

import pytest
import torch

from finetune.config import ModelConfig, TrainConfig
from finetune.data import encode_prompt, load_split, load_training_examples
from finetune.model import PAD_ID, Decoder
from finetune.train import TrainError, train, write_report

from conftest import make_dataset


def _quick_cfg():
    return TrainConfig(epochs=2, batch_size=4, learning_rate=1e-3, seed=3)


def test_encode_prompt_byte_level():
    example = encode_prompt("m", "TDAT\nx\nSUMMARY\nok")
    assert example.ids[:-1] == list("TDAT\nx\nSUMMARY\nok".encode("utf-8"))
    assert example.ids[-1] == PAD_ID
    assert example.summary_start == len("TDAT\nx\nSUMMARY\n")


def test_load_training_examples(dataset_path):
    examples = load_training_examples(dataset_path)
    assert len(examples) == 20
    assert examples[0].method_id == "method-000"


def test_loss_decreases(toy_cfg, dataset_path, tmp_path):
    report = train(
        toy_cfg,
        _quick_cfg(),
        dataset_path,
        out_checkpoint=tmp_path / "model.pt",
    )
    assert report.final_loss < report.initial_loss


def test_seeded_rerun_bitwise_identical(toy_cfg, dataset_path, tmp_path):
    first = train(toy_cfg, _quick_cfg(), dataset_path, out_checkpoint=tmp_path / "a.pt")
    second = train(toy_cfg, _quick_cfg(), dataset_path, out_checkpoint=tmp_path / "b.pt")
    assert first.final_loss == second.final_loss
    assert first.loss_curve == second.loss_curve


def test_frozen_hash_stable_through_training(toy_cfg, dataset_path, tmp_path):
    report = train(toy_cfg, _quick_cfg(), dataset_path, out_checkpoint=tmp_path / "m.pt")
    assert report.frozen_hash_before == report.frozen_hash_after


def test_split_excludes_held_out_example(toy_cfg, dataset_path, tmp_path):
    split = tmp_path / "loo_000.json"
    ids = [f"method-{i:03d}" for i in range(20)]
    split.write_text(
        json.dumps({"held_out_id": "method-007", "train_ids": [i for i in ids if i != "method-007"]}),
        encoding="utf-8",
    )
    report = train(
        toy_cfg,
        _quick_cfg(),
        dataset_path,
        split_path=split,
        out_checkpoint=tmp_path / "m.pt",
    )
    assert "method-007" not in report.example_ids
    assert len(report.example_ids) == 19


def test_over_window_examples_skipped(dataset_path, tmp_path):
    # the context-free prompts fit in 96 bytes; the ones with CONTEXT lines do not
    tiny_window = ModelConfig(n_blocks=2, d_model=32, vocab_size=257, window=96)
    report = train(
        tiny_window,
        _quick_cfg(),
        dataset_path,
        out_checkpoint=tmp_path / "m.pt",
    )
    assert report.skipped_over_window > 0
    assert len(report.example_ids) > 0
    assert len(report.example_ids) + report.skipped_over_window == 20


def test_empty_train_set_errors(toy_cfg, tmp_path):
    dataset = tmp_path / "train.jsonl"
    make_dataset(dataset, count=3)
    split = tmp_path / "empty.json"
    split.write_text(json.dumps({"held_out_id": None, "train_ids": []}), encoding="utf-8")
    with pytest.raises(TrainError):
        train(toy_cfg, _quick_cfg(), dataset, split_path=split, out_checkpoint=tmp_path / "m.pt")


def test_vocab_too_small_for_bytes(tmp_path, dataset_path):
    cfg = ModelConfig(n_blocks=2, d_model=16, vocab_size=128, window=64)
    with pytest.raises(TrainError, match="vocab_size"):
        train(cfg, _quick_cfg(), dataset_path, out_checkpoint=tmp_path / "m.pt")


def test_summary_only_scope_trains(toy_cfg, dataset_path, tmp_path):
    train_cfg = TrainConfig(epochs=2, batch_size=4, loss_scope="summary_only", seed=1)
    report = train(toy_cfg, train_cfg, dataset_path, out_checkpoint=tmp_path / "m.pt")
    assert report.final_loss < report.initial_loss


def test_checkpoint_roundtrip(toy_cfg, dataset_path, tmp_path):
    checkpoint = tmp_path / "model.pt"
    train(toy_cfg, _quick_cfg(), dataset_path, out_checkpoint=checkpoint)
    payload = torch.load(checkpoint, weights_only=False)
    model = Decoder(ModelConfig(**payload["model_config"]))
    model.load_state_dict(payload["model_state"])
    assert sorted(payload["frozen_tensor_names"])


def test_report_file(toy_cfg, dataset_path, tmp_path):
    report = train(toy_cfg, _quick_cfg(), dataset_path, out_checkpoint=tmp_path / "m.pt")
    out = tmp_path / "report.json"
    write_report(report, out)
    payload = json.loads(out.read_text())
    assert payload["trainable_params"] + payload["frozen_params"] == payload["total_params"]
    assert payload["frozen_hash_before"] == payload["frozen_hash_after"]


def test_load_split_roundtrip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"held_out_id": "x", "train_ids": ["a", "b"]}))
    held, ids = load_split(path)
    assert held == "x"
    assert ids == ["a", "b"]
