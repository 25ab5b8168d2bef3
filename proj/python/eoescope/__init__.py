"""Endoscopic image dataset, classifier and attention rollout toolkit."""

from ._core import (
    TAXONOMY_VERSION,
    EoescopeError,
    assign_splits,
    class_names,
    decode_labels,
    difference_hash,
    encode_labels,
    evaluate,
    f1,
    format_table,
    manifest_counts,
    predict,
    published_counts,
    rollout,
    sha256_hex,
    validate_manifest,
    viridis,
)

__all__ = [
    "TAXONOMY_VERSION",
    "EoescopeError",
    "assign_splits",
    "class_names",
    "decode_labels",
    "difference_hash",
    "encode_labels",
    "evaluate",
    "f1",
    "format_table",
    "manifest_counts",
    "predict",
    "published_counts",
    "rollout",
    "sha256_hex",
    "validate_manifest",
    "viridis",
]
