import json

import pytest

from finetune.config import ModelConfig


@pytest.fixture
def toy_cfg() -> ModelConfig:
    return ModelConfig(n_blocks=4, d_model=32, vocab_size=257, window=192)


def make_dataset(path, count: int = 20):
    """Write a pipeline-schema train.jsonl with synthetic prompts."""
    rows = []
    for i in range(count):
        target = f"void m{i}(int x) {{ helper{i % 3}(x); }}"
        descriptions = [f"caller {i} does step {j}." for j in range(i % 3)]
        summary = f"This method is used to run step {i} ."
        if descriptions:
            prompt = (
                "TDAT\n" + target + "\nCONTEXT\n" + "\n".join(descriptions)
                + "\nSUMMARY\n" + summary
            )
        else:
            prompt = "TDAT\n" + target + "\nSUMMARY\n" + summary
        rows.append(
            {
                "method_id": f"method-{i:03d}",
                "target_source": target,
                "descriptions": descriptions,
                "summary": summary,
                "serialized_prompt": prompt,
            }
        )
    path.write_text(
        "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n",
        encoding="utf-8",
    )
    return [r["method_id"] for r in rows]


@pytest.fixture
def dataset_path(tmp_path):
    path = tmp_path / "train.jsonl"
    make_dataset(path)
    return path
