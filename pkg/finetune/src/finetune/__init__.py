"""Weight-freezing fine-tuning for a small decoder language model.

Consumes the training datasets (train.jsonl) and leave-one-out split files
produced by the ctxsum pipeline, freezes all embedding tensors plus every
transformer block whose 1-based index is divisible by four, and fine-tunes
the remaining parameters.
"""

__version__ = "0.1.0"
