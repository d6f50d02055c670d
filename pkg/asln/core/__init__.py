"""Numerical core for asln."""

from .generative import (
    GenerativeProcess,
    GroundTruth,
    Nonlinearity,
    SampleBatch,
    SourceDistribution,
    build_process,
    ground_truth_decomposition,
    sample_batch,
)
from .spectral import SpectralDecomposition, SvdDecomposition, pinv, svd_thin, sym_eig

__all__ = [
    "GenerativeProcess",
    "GroundTruth",
    "Nonlinearity",
    "SampleBatch",
    "SourceDistribution",
    "SpectralDecomposition",
    "SvdDecomposition",
    "build_process",
    "ground_truth_decomposition",
    "pinv",
    "sample_batch",
    "svd_thin",
    "sym_eig",
]
