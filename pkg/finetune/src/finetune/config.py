"""Model and training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ModelConfig:
    n_blocks: int = 24
    d_model: int = 1024
    vocab_size: int = 257          # 256 byte values + one pad/end id
    window: int = 1024
    tied_output_embedding: bool = True

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")

    @property
    def n_heads(self) -> int:
        return max(1, self.d_model // 64)


@dataclass(frozen=True)
class TrainConfig:
    # defaults are working values for the toy scale, not tuned settings
    epochs: int = 4
    batch_size: int = 4
    learning_rate: float = 1e-3
    dropout: float = 0.1
    loss_scope: str = "full_sequence"   # or "summary_only"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss_scope not in ("full_sequence", "summary_only"):
            raise ValueError(f"unknown loss_scope {self.loss_scope!r}")


@dataclass
class TrainReport:
    initial_loss: float
    final_loss: float
    loss_curve: list[float]
    epochs: int
    steps: int
    total_params: int
    trainable_params: int
    frozen_params: int
    skipped_over_window: int
    example_ids: list[str] = field(default_factory=list)
    frozen_hash_before: str = ""
    frozen_hash_after: str = ""
    seed: int = 0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "loss_curve": self.loss_curve,
            "epochs": self.epochs,
            "steps": self.steps,
            "total_params": self.total_params,
            "trainable_params": self.trainable_params,
            "frozen_params": self.frozen_params,
            "skipped_over_window": self.skipped_over_window,
            "example_ids": self.example_ids,
            "frozen_hash_before": self.frozen_hash_before,
            "frozen_hash_after": self.frozen_hash_after,
            "seed": self.seed,
            "notes": self.notes,
        }
