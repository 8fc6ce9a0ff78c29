"""Exact integer tensors and the uniform affine quantize/dequantize operators.

All scales are stored as real log2 exponents (s = 2^d); zero points are
integers and are zero everywhere in this codebase (symmetric quantization).
Two rounding modes are supported: half-to-even ("half") and truncation
toward zero ("to_zero").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_BITS = 64


@dataclass(frozen=True)
class DType:
    """Integer data-type descriptor: bit width and signedness."""

    bits: int
    signed: bool = True

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [1, {MAX_BITS}], got {self.bits}")

    @property
    def min(self) -> int:
        return -(1 << (self.bits - 1)) if self.signed else 0

    @property
    def max(self) -> int:
        return (1 << (self.bits - 1)) - 1 if self.signed else (1 << self.bits) - 1

    @property
    def sign_bit(self) -> int:
        """1 for signed types, 0 for unsigned (the indicator used in bounds)."""
        return 1 if self.signed else 0

    def contains(self, values) -> bool:
        a = np.asarray(values)
        if a.size == 0:
            return True
        return bool(a.min() >= self.min and a.max() <= self.max)

    def __str__(self) -> str:
        return f"{'int' if self.signed else 'uint'}{self.bits}"


@dataclass(frozen=True)
class IntTensor:
    """Multidimensional array of exact integers plus its data-type descriptor.

    Immutable after construction; every element is validated against the
    dtype's representable range.
    """

    data: np.ndarray
    dtype: DType

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if not self.dtype.contains(arr):
            raise ValueError(
                f"values outside {self.dtype} range [{self.dtype.min}, {self.dtype.max}]"
            )

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __len__(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class QuantSpec:
    """Affine quantizer parameters: log2-scale d (s = 2^d), zero point z, dtype."""

    d: float
    dtype: DType
    z: int = 0

    def __post_init__(self):
        if not np.isfinite(self.d):
            raise ValueError("log2-scale d must be finite")

    @property
    def scale(self) -> float:
        return float(np.exp2(self.d))


def clip(x, n, p):
    """min(max(x; n); p). Works on scalars and arrays."""
    if n > p:
        raise ValueError(f"empty clip range [{n}, {p}]")
    return np.minimum(np.maximum(x, n), p)


def round_half(x):
    """Round to nearest integer, ties to even."""
    return np.round(x)


def round_to_zero(x):
    """Truncate toward zero; never increases magnitude."""
    return np.trunc(x)


_ROUNDERS = {"half": round_half, "to_zero": round_to_zero}


def quantize(x, q: QuantSpec, mode: str = "half") -> IntTensor:
    """Elementwise clip(round(x / s) + z; n, p) onto q.dtype's integer grid."""
    if mode not in _ROUNDERS:
        raise ValueError(f"unknown rounding mode {mode!r}")
    arr = np.asarray(x, dtype=np.float64)
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"non-finite input element at index {idx}: {arr[bad][0]}")
    scaled = _ROUNDERS[mode](arr / q.scale) + q.z
    out = clip(scaled, q.dtype.min, q.dtype.max).astype(np.int64)
    return IntTensor(out, q.dtype)


def dequantize(x: IntTensor, q: QuantSpec) -> np.ndarray:
    """Elementwise s * (x - z) back into the real domain."""
    if x.dtype != q.dtype:
        raise ValueError(f"tensor dtype {x.dtype} does not match spec dtype {q.dtype}")
    return (x.data - q.z) * q.scale
