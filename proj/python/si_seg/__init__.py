"""Selective p-values for segmentations produced by piecewise-linear networks."""

from ._core import (
    ArgumentError,
    Error,
    FormatError,
    Network,
    ValidationError,
    load_network,
    make_cnn4_network,
    make_cnn4_segmenter,
    naive_p,
    save_network,
    segment,
    selective_test,
    truncated_two_sided_p,
)

__all__ = [
    "ArgumentError",
    "Error",
    "FormatError",
    "Network",
    "ValidationError",
    "load_network",
    "make_cnn4_network",
    "make_cnn4_segmenter",
    "naive_p",
    "save_network",
    "segment",
    "selective_test",
    "truncated_two_sided_p",
]
