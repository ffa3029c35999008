"""Context-aware Java method summarization toolchain.

Builds an index of Java methods and their call sites, derives caller
contexts, renders summarization prompts against pluggable model backends,
constructs distillation training datasets, and analyzes tournament-style
study responses.
"""

__version__ = "0.1.0"
