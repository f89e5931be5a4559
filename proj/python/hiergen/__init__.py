"""Two-phase outline-then-article text generation."""

from ._core import (
    HiergenError,
    Model,
    aggregate_sizes,
    clean_corpus,
    doc_lower_bound,
    generate_pipeline,
    gradcheck,
    is_stop_word,
    outline,
    perplexity_from_probabilities,
    porter_stem,
    run_cli,
    synthetic_corpus,
)

__all__ = [
    "HiergenError",
    "Model",
    "aggregate_sizes",
    "clean_corpus",
    "doc_lower_bound",
    "generate_pipeline",
    "gradcheck",
    "is_stop_word",
    "outline",
    "perplexity_from_probabilities",
    "porter_stem",
    "run_cli",
    "synthetic_corpus",
]
