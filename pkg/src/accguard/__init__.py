"""Quantization-aware training with guaranteed accumulator overflow avoidance."""

from .bounds import (
    BoundQuery,
    BoundResult,
    datatype_bound,
    exhaustive_min_bits,
    l1_budget,
    l1_budget_floor,
    phi,
    weight_bound,
)
from .estimator import QuantMLPClassifier
from .infer import AccumulatorSpec, OverflowReport, acc_step, equivalence_check, run_int
from .metrics import compression_rate, entropy, sparsity
from .qcore import DType, IntTensor, QuantSpec, clip, dequantize, quantize, round_half, round_to_zero
from .wnq import AccumConstraint, WNQChannelParams, baseline_quant, cap_T, init_from_float, penalty, wnq_forward

__version__ = "0.1.0"

__all__ = [
    "AccumConstraint",
    "AccumulatorSpec",
    "BoundQuery",
    "BoundResult",
    "DType",
    "IntTensor",
    "OverflowReport",
    "QuantMLPClassifier",
    "QuantSpec",
    "WNQChannelParams",
    "acc_step",
    "baseline_quant",
    "cap_T",
    "clip",
    "compression_rate",
    "datatype_bound",
    "dequantize",
    "entropy",
    "equivalence_check",
    "exhaustive_min_bits",
    "init_from_float",
    "l1_budget",
    "l1_budget_floor",
    "penalty",
    "phi",
    "quantize",
    "round_half",
    "round_to_zero",
    "run_int",
    "sparsity",
    "weight_bound",
    "wnq_forward",
]
