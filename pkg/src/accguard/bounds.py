"""Closed-form accumulator bit-width lower bounds and l1 budgets.

Two closed-form bounds are provided: one from the data types alone and a
tighter one from frozen weights. `exhaustive_min_bits` is the enumeration
oracle used to validate them: it searches the input dtype's actual value
range per element instead of trusting the closed-form magnitude bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .qcore import DType, IntTensor

EXHAUSTIVE_K_LIMIT = 24


@dataclass(frozen=True)
class BoundQuery:
    """Dot-product length K plus input and weight data types."""

    K: int
    input_dtype: DType
    weight_dtype: DType

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass(frozen=True)
class BoundResult:
    real_bound: float
    min_bits: int


def phi(a: float) -> float:
    """log2(1 + 2^-a); strictly positive, decreasing in a."""
    return float(np.log2(1.0 + np.exp2(-a)))


def _min_bits_for_magnitude(mag: int) -> int:
    # Smallest signed P with mag <= 2^(P-1) - 1, computed in exact
    # integer arithmetic so power-of-two edge cases never misround.
    if mag <= 0:
        return 1
    return mag.bit_length() + 1


def datatype_bound(q: BoundQuery) -> BoundResult:
    """Accumulator lower bound from worst-case data-type ranges."""
    n = q.input_dtype.bits
    m = q.weight_dtype.bits
    alpha = math.log2(q.K) + n + m - 1 - q.input_dtype.sign_bit
    real = alpha + phi(alpha) + 1.0
    # Exact integer form of the same bound: K * 2^(N+M-1-sign) <= 2^(P-1) - 1.
    mag = q.K * (1 << (n + m - 1 - q.input_dtype.sign_bit))
    return BoundResult(real_bound=real, min_bits=max(2, _min_bits_for_magnitude(mag)))


def weight_bound(w: IntTensor, input_dtype: DType) -> BoundResult:
    """Tighter accumulator lower bound from the frozen weight vector."""
    if w.data.ndim != 1 or len(w) == 0:
        raise ValueError("w must be a nonempty 1-D IntTensor")
    l1 = int(np.abs(w.data).sum())
    if l1 == 0:
        # Degenerate: a zero dot product overflows nothing.
        return BoundResult(real_bound=float("-inf"), min_bits=1)
    n = input_dtype.bits
    beta = math.log2(l1) + n - input_dtype.sign_bit
    real = beta + phi(beta) + 1.0
    mag = l1 * (1 << (n - input_dtype.sign_bit))
    return BoundResult(real_bound=real, min_bits=max(2, _min_bits_for_magnitude(mag)))


def l1_budget(P: int, input_dtype: DType) -> float:
    """Largest l1 norm of integer weights that provably fits a P-bit accumulator."""
    if P < 1:
        raise ValueError("P must be >= 1")
    return ((1 << (P - 1)) - 1) * float(
        np.exp2(input_dtype.sign_bit - input_dtype.bits)
    )


def l1_budget_floor(P: int, input_dtype: DType) -> int:
    """floor(l1_budget) in exact integer arithmetic."""
    if P < 1:
        raise ValueError("P must be >= 1")
    frac = Fraction((1 << (P - 1)) - 1, 1) * Fraction(2) ** (
        input_dtype.sign_bit - input_dtype.bits
    )
    return math.floor(frac)


def worst_case_abs_products(w: IntTensor, input_dtype: DType) -> np.ndarray:
    """Per-element max |x * w_i| over every x in the input dtype's range.

    Found by enumerating the input range rather than by formula, so this
    stays independent of the closed-form bounds it validates.
    """
    if w.data.ndim != 1 or len(w) == 0:
        raise ValueError("w must be a nonempty 1-D IntTensor")
    xs = np.arange(input_dtype.min, input_dtype.max + 1, dtype=np.int64)
    return np.abs(xs[:, None] * w.data[None, :]).max(axis=0)


def exhaustive_min_bits(w: IntTensor, input_dtype: DType) -> int:
    """Oracle: smallest P whose register holds the worst-case magnitude sum.

    Accumulates the per-element worst-case product magnitudes in index
    order and requires every running total to fit in [-(2^(P-1)),
    2^(P-1)-1]; this is the order-independent quantity the closed-form
    bounds must cover.
    """
    if len(w) > EXHAUSTIVE_K_LIMIT:
        raise ValueError(
            f"K={len(w)} exceeds the exhaustive search budget "
            f"({EXHAUSTIVE_K_LIMIT}); use the sign-aligned worst case "
            "from the attack module instead"
        )
    worst = worst_case_abs_products(w, input_dtype)
    peak = int(np.cumsum(worst).max(initial=0))
    return _min_bits_for_magnitude(peak)
