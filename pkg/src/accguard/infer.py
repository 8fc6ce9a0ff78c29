"""Bit-accurate integer inference with exact P-bit accumulator simulation.

Every multiply-accumulate is stepped through a simulated P-bit signed
register in wraparound, saturate, or wide-reference mode, counting every
partial sum that leaves the representable range. Requantization between
layers is computed in wide (float64) arithmetic from the register value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qcore import DType, IntTensor
from .serde import ModelCheckpoint, network_from_checkpoint

MODES = ("wraparound", "saturate", "wide")


@dataclass(frozen=True)
class AccumulatorSpec:
    bits: int
    mode: str = "wide"

    def __post_init__(self):
        if self.bits < 2:
            raise ValueError("accumulator needs at least 2 bits")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def min(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def max(self) -> int:
        return (1 << (self.bits - 1)) - 1


def acc_step(acc: int, product: int, spec: AccumulatorSpec) -> tuple[int, bool]:
    """One MAC into a P-bit register; returns (new register, overflow flag)."""
    exact = acc + product
    flag = exact < spec.min or exact > spec.max
    if spec.mode == "wraparound":
        width = 1 << spec.bits
        new = ((exact - spec.min) % width) + spec.min
    elif spec.mode == "saturate":
        new = min(max(exact, spec.min), spec.max)
    else:
        new = exact
    return new, flag


@dataclass
class LayerOverflow:
    overflows: np.ndarray  # per-neuron count of out-of-range partial sums
    worst_excursion: np.ndarray  # per-neuron max distance outside the range
    macs: int  # MACs per neuron across the batch


@dataclass
class OverflowReport:
    layers: list[LayerOverflow] = field(default_factory=list)

    @property
    def total_overflows(self) -> int:
        return int(sum(l.overflows.sum() for l in self.layers))

    def rows(self) -> list[dict]:
        out = []
        for li, layer in enumerate(self.layers):
            for ni in range(len(layer.overflows)):
                out.append(
                    {
                        "layer": li,
                        "neuron": ni,
                        "overflows": int(layer.overflows[ni]),
                        "worst_excursion": int(layer.worst_excursion[ni]),
                        "macs": layer.macs,
                    }
                )
        return out


def _simulate_layer(
    x: np.ndarray, w: np.ndarray, spec: AccumulatorSpec
) -> tuple[np.ndarray, LayerOverflow]:
    """MAC chain in index order for batch x (B, K) and weights w (C, K)."""
    B, K = x.shape
    C = w.shape[0]
    reg = np.zeros((B, C), dtype=np.int64)
    counts = np.zeros(C, dtype=np.int64)
    worst = np.zeros(C, dtype=np.int64)
    # Registers wider than 62 bits cannot wrap within int64 partial-sum
    # ranges, so they fall through to exact arithmetic.
    width = 1 << spec.bits if spec.bits <= 62 else None
    for k in range(K):
        prod = x[:, k : k + 1] * w[None, :, k]
        exact = reg + prod
        over = np.maximum(exact - spec.max, 0) + np.maximum(spec.min - exact, 0)
        counts += (over > 0).sum(axis=0)
        worst = np.maximum(worst, over.max(axis=0))
        if spec.mode == "wraparound" and width is not None:
            reg = ((exact - spec.min) % width) + spec.min
        elif spec.mode == "saturate":
            reg = np.clip(exact, spec.min, spec.max)
        else:
            reg = exact
    return reg, LayerOverflow(overflows=counts, worst_excursion=worst, macs=B * K)


def run_int(
    model: ModelCheckpoint,
    x: IntTensor,
    specs: list[AccumulatorSpec] | None = None,
    mode: str = "wide",
) -> tuple[IntTensor, OverflowReport]:
    """Execute the checkpoint on integer inputs; returns final accumulators.

    `specs` overrides the per-layer accumulator widths; by default each
    layer uses its stored acc_bits with the given mode.
    """
    if specs is None:
        specs = [AccumulatorSpec(rec.acc_bits, mode) for rec in model.layers]
    if len(specs) != len(model.layers):
        raise ValueError("need one AccumulatorSpec per layer")
    xd = x.data
    squeeze = xd.ndim == 1
    if squeeze:
        xd = xd[None, :]
    if x.dtype != model.input_dtype:
        raise ValueError(
            f"input dtype {x.dtype} does not match model input {model.input_dtype}"
        )
    s_x = np.exp2(model.input_d)
    report = OverflowReport()
    cur = xd.astype(np.int64)
    for i, (rec, spec) in enumerate(zip(model.layers, specs)):
        if cur.shape[1] != rec.in_features:
            raise ValueError(
                f"layer {i} expects {rec.in_features} features, got {cur.shape[1]}"
            )
        reg, layer_report = _simulate_layer(cur, rec.w_int, spec)
        report.layers.append(layer_report)
        if i < len(model.layers) - 1:
            # Requantize in wide arithmetic from the register value.
            scale = s_x * np.exp2(rec.d)
            val = np.maximum(reg * scale[None, :], 0.0)
            s_a = np.exp2(rec.act_d)
            nxt = DType(rec.act_bits, signed=rec.act_signed)
            cur = np.clip(np.round(val / s_a), nxt.min, nxt.max).astype(np.int64)
            s_x = s_a
        else:
            out = reg[0] if squeeze else reg
    return IntTensor(out, DType(64, signed=True)), report


def dequantized_outputs(model: ModelCheckpoint, out: IntTensor) -> np.ndarray:
    """Map final accumulators back to the real domain (logits)."""
    rec = model.layers[-1]
    s_x = np.exp2(model.input_d)
    for prev in model.layers[:-1]:
        s_x = np.exp2(prev.act_d)
    scale = s_x * np.exp2(rec.d)
    return out.data * scale


def equivalence_check(model: ModelCheckpoint, x: IntTensor) -> bool:
    """True iff integer execution matches the fake-quant forward bit-exactly."""
    out, _ = run_int(model, x, mode="wide")
    int_logits = dequantized_outputs(model, out)
    net = network_from_checkpoint(model)
    xd = x.data if x.data.ndim == 2 else x.data[None, :]
    logits, _ = net.forward(xd.astype(np.float64))
    fake = logits.data if x.data.ndim == 2 else logits.data[0]
    return bool(np.array_equal(int_logits, fake))
