"""Accumulator-aware weight quantizer.

Per-channel l1 weight normalization with a hard norm cap: the weight
vector is reparameterized as direction v and log2-norm t, the norm is
clamped to the cap T implied by the target accumulator width, and
scaled values are rounded toward zero. Together these make the integer
weights' l1 norm fit the accumulator budget unconditionally, for any
parameter values. The standard per-channel symmetric quantizer is kept
as the baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import l1_budget_floor
from .qcore import DType, IntTensor, clip, round_half, round_to_zero


@dataclass
class WNQChannelParams:
    """Learnable per-channel parameters: direction v, log2-norm t, log2-scale d."""

    v: np.ndarray
    t: float
    d: float

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.v.ndim != 1 or self.v.size == 0:
            raise ValueError("v must be a nonempty 1-D vector")


@dataclass(frozen=True)
class AccumConstraint:
    """Target accumulator width P* and the dtype of incoming activations."""

    P_star: int
    input_dtype: DType

    def __post_init__(self):
        if self.P_star < 2:
            raise ValueError("P_star must be >= 2 (a signed accumulator needs 2 bits)")


def cap_T(c: AccumConstraint, d: float):
    """Log2-domain norm cap: sign(x) + log2(2^(P-1) - 1) + d - N."""
    return (
        c.input_dtype.sign_bit
        + math.log2((1 << (c.P_star - 1)) - 1)
        - c.input_dtype.bits
        + d
    )


def wnq_forward(
    params: WNQChannelParams, c: AccumConstraint, weight_dtype: DType
) -> tuple[IntTensor, np.ndarray]:
    """One channel's constrained quantization: returns (w_int, w_fake).

    g = 2^min(T, t), s = 2^d; w_int = clip(trunc(g*v / (||v||1 * s)); n, p)
    and w_fake = w_int * s. Rounding toward zero plus the cap make
    sum|w_int| <= floor(l1_budget(P*, input_dtype)) hold for any t, d, v.
    """
    if not weight_dtype.signed:
        raise ValueError("weight dtype must be signed")
    norm = float(np.abs(params.v).sum())
    if norm == 0.0:
        raise ValueError("||v||1 = 0: direction undefined")
    T = cap_T(c, params.d)
    # g/s as one exp2 of the log-domain difference; min(T, t) - d keeps
    # the ratio at or below the budget even when t >> T.
    ratio = np.exp2(min(T, params.t) - params.d)
    scaled = ratio * (params.v / norm)
    w_int = clip(round_to_zero(scaled), weight_dtype.min, weight_dtype.max).astype(
        np.int64
    )
    s = float(np.exp2(params.d))
    return IntTensor(w_int, weight_dtype), w_int * s


def baseline_quant(
    w: np.ndarray, d: float, weight_dtype: DType
) -> tuple[IntTensor, np.ndarray]:
    """Standard symmetric fake quantization (half rounding, no norm cap)."""
    if not weight_dtype.signed:
        raise ValueError("weight dtype must be signed")
    s = float(np.exp2(d))
    w_int = clip(
        round_half(np.asarray(w, dtype=np.float64) / s),
        weight_dtype.min,
        weight_dtype.max,
    ).astype(np.int64)
    return IntTensor(w_int, weight_dtype), w_int * s


def penalty(t_values, T_values) -> float:
    """Sum of positive parts (t - T)+ across channels/layers."""
    t_arr = np.asarray(t_values, dtype=np.float64)
    T_arr = np.asarray(T_values, dtype=np.float64)
    if t_arr.shape != T_arr.shape:
        raise ValueError(f"length mismatch: {t_arr.shape} vs {T_arr.shape}")
    return float(np.maximum(t_arr - T_arr, 0.0).sum())


def init_from_float(
    w_float: np.ndarray, weight_dtype: DType, rng: np.random.Generator | None = None
) -> WNQChannelParams:
    """Deterministic initialization from a float weight row.

    v = w_float, d maps the float range onto the integer grid, t matches
    the float l1 norm. An all-zero row gets a tiny seeded direction so
    the reparameterization stays defined.
    """
    w = np.asarray(w_float, dtype=np.float64)
    amax = float(np.abs(w).max(initial=0.0))
    if amax == 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        d = math.log2(1.0 / weight_dtype.max)
        v = rng.uniform(-1e-3, 1e-3, size=w.shape)
        while float(np.abs(v).sum()) == 0.0:
            v = rng.uniform(-1e-3, 1e-3, size=w.shape)
        return WNQChannelParams(v=v, t=d, d=d)
    d = math.log2(amax / weight_dtype.max)
    t = math.log2(float(np.abs(w).sum()))
    return WNQChannelParams(v=w.copy(), t=t, d=d)


def channel_budget_ok(w_int: IntTensor, c: AccumConstraint) -> bool:
    """Exact check of the hard guarantee for one channel."""
    return int(np.abs(w_int.data).sum()) <= l1_budget_floor(c.P_star, c.input_dtype)
