"""Deterministic video curation into temporal-preference pairs, plus a toy
differentiable preference-training harness.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface. Pipeline functions take a JSON config path and write
their artifacts under the configured output directory, mirroring the
`temple-forge` command-line tool.
"""

from ._core import (
    __version__,
    apply_perturbation,
    build_pairs,
    caption,
    config_hash,
    derive_seed,
    funnel_report,
    make_demo_corpus,
    partition_groups,
    select,
    train_toy,
    validate_dataset,
)

__all__ = [
    "__version__",
    "apply_perturbation",
    "build_pairs",
    "caption",
    "config_hash",
    "derive_seed",
    "funnel_report",
    "make_demo_corpus",
    "partition_groups",
    "select",
    "train_toy",
    "validate_dataset",
]
