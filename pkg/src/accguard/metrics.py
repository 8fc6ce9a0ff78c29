"""Sparsity, entropy, and compressibility measurements for integer weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import IntTensor
from .serde import ModelCheckpoint


@dataclass(frozen=True)
class CompressionStats:
    sparsity: float
    entropy_bits: float
    compression_rate: float  # inf when entropy is zero
    relative_performance: float | None = None


def sparsity(w: IntTensor) -> float:
    """Fraction of zero-valued elements."""
    if w.data.size == 0:
        raise ValueError("empty tensor")
    return float((w.data == 0).mean())


def entropy(w: IntTensor) -> float:
    """Shannon entropy (bits/element) of the empirical value distribution."""
    if w.data.size == 0:
        raise ValueError("empty tensor")
    _, counts = np.unique(w.data, return_counts=True)
    p = counts / w.data.size
    return float(-(p * np.log2(p)).sum())


def compression_rate(w: IntTensor, M: int) -> float:
    """Stored bits per element over the entropy lower bound; inf if entropy 0."""
    h = entropy(w)
    return float("inf") if h == 0.0 else M / h


def tensor_stats(w: IntTensor, M: int) -> CompressionStats:
    return CompressionStats(
        sparsity=sparsity(w),
        entropy_bits=entropy(w),
        compression_rate=compression_rate(w, M),
    )


def model_stats(model: ModelCheckpoint) -> CompressionStats:
    """Size-weighted aggregate across all weight tensors of a checkpoint."""
    sizes = np.array([rec.w_int.size for rec in model.layers], dtype=np.float64)
    sp = np.array(
        [sparsity(IntTensor(rec.w_int, rec.weight_dtype)) for rec in model.layers]
    )
    en = np.array(
        [entropy(IntTensor(rec.w_int, rec.weight_dtype)) for rec in model.layers]
    )
    bits = np.array([rec.weight_bits for rec in model.layers], dtype=np.float64)
    wts = sizes / sizes.sum()
    mean_entropy = float((en * wts).sum())
    mean_bits = float((bits * wts).sum())
    return CompressionStats(
        sparsity=float((sp * wts).sum()),
        entropy_bits=mean_entropy,
        compression_rate=float("inf") if mean_entropy == 0 else mean_bits / mean_entropy,
    )
