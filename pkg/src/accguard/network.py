"""Fully-connected quantized networks built on the autodiff engine.

Layers keep activations in the (integer-grid value, scale) form: the
matmul runs on integer-valued float64 arrays (exact below 2^53) and the
combined scale is applied once, which is what makes the training-time
forward bit-identical to integer inference after dequantization.
Networks are bias-free; accumulator bounds and the overflow guarantee
are stated for pure dot products.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, clip_ste, cross_entropy_logits, linear, minimum, round_ste, trunc_ste
from .qcore import DType
from .wnq import AccumConstraint, cap_T

LOG2 = math.log(2.0)


class ActQuant:
    """Per-tensor activation quantizer with a learnable log2 scale."""

    def __init__(self, bits: int, d_init: float, signed: bool = False):
        self.dtype = DType(bits, signed=signed)
        self.d = Tensor(float(d_init), requires_grad=True)

    def forward(self, pre: Tensor) -> tuple[Tensor, Tensor]:
        s = self.d.exp2()
        q = clip_ste(round_ste(pre.relu() / s), self.dtype.min, self.dtype.max)
        return q, s


class WNQDense:
    """Dense layer with the l1-capped weight-normalization quantizer."""

    kind = "wnq"

    def __init__(
        self,
        v: np.ndarray,
        t: np.ndarray,
        d: np.ndarray,
        weight_dtype: DType,
        constraint: AccumConstraint,
    ):
        self.V = Tensor(np.asarray(v, dtype=np.float64), requires_grad=True)
        self.t = Tensor(np.asarray(t, dtype=np.float64), requires_grad=True)
        self.d = Tensor(np.asarray(d, dtype=np.float64), requires_grad=True)
        self.weight_dtype = weight_dtype
        self.constraint = constraint

    @property
    def out_features(self) -> int:
        return self.V.shape[0]

    @property
    def in_features(self) -> int:
        return self.V.shape[1]

    def _cap(self) -> Tensor:
        c = self.constraint
        const = (
            c.input_dtype.sign_bit
            + math.log2((1 << (c.P_star - 1)) - 1)
            - c.input_dtype.bits
        )
        return self.d + const

    def weight_int(self) -> Tensor:
        """Integer-valued quantized weights (C, K) with STE gradients."""
        norm = self.V.abs().sum(axis=1, keepdims=True)
        ratio = minimum(self.t, self._cap()) - self.d
        scaled = ratio.exp2().reshape(-1, 1) * (self.V / norm)
        return clip_ste(trunc_ste(scaled), self.weight_dtype.min, self.weight_dtype.max)

    def forward(self, x_q: Tensor, s_x: Tensor) -> Tensor:
        w_int = self.weight_int()
        scale = s_x * self.d.exp2()
        return linear(x_q, w_int) * scale.reshape(1, -1)

    def penalty(self) -> Tensor:
        return (self.t - self._cap()).relu().sum()

    def params(self):
        yield "v", self.V, True
        yield "t", self.t, False
        yield "d", self.d, False


class BaselineDense:
    """Dense layer with the standard per-channel symmetric quantizer."""

    kind = "baseline"

    def __init__(self, w: np.ndarray, d: np.ndarray, weight_dtype: DType):
        self.W = Tensor(np.asarray(w, dtype=np.float64), requires_grad=True)
        self.d = Tensor(np.asarray(d, dtype=np.float64), requires_grad=True)
        self.weight_dtype = weight_dtype
        self.constraint = None

    @property
    def out_features(self) -> int:
        return self.W.shape[0]

    @property
    def in_features(self) -> int:
        return self.W.shape[1]

    def weight_int(self) -> Tensor:
        s = self.d.exp2().reshape(-1, 1)
        return clip_ste(round_ste(self.W / s), self.weight_dtype.min, self.weight_dtype.max)

    def forward(self, x_q: Tensor, s_x: Tensor) -> Tensor:
        w_int = self.weight_int()
        scale = s_x * self.d.exp2()
        return linear(x_q, w_int) * scale.reshape(1, -1)

    def penalty(self) -> Tensor:
        return Tensor(0.0)

    def params(self):
        yield "w", self.W, True
        yield "d", self.d, False


class FloatDense:
    """Unquantized dense layer (floating-point reference)."""

    kind = "float"

    def __init__(self, w: np.ndarray):
        self.W = Tensor(np.asarray(w, dtype=np.float64), requires_grad=True)
        self.constraint = None

    @property
    def out_features(self) -> int:
        return self.W.shape[0]

    @property
    def in_features(self) -> int:
        return self.W.shape[1]

    def forward(self, x: Tensor, s_x: Tensor) -> Tensor:
        return linear(x, self.W)

    def penalty(self) -> Tensor:
        return Tensor(0.0)

    def params(self):
        yield "w", self.W, True


class Network:
    """Stack of dense layers with activation quantizers in between.

    `input_d` is the fixed log2 scale of the input quantizer; incoming
    batches are expected already on the integer grid (see quantize_input).
    For float networks input_d/input_dtype are None and batches are raw.
    """

    def __init__(self, layers, act_quants, input_d, input_dtype):
        if len(act_quants) != len(layers) - 1:
            raise ValueError("need one activation quantizer between consecutive layers")
        self.layers = layers
        self.act_quants = act_quants
        self.input_d = input_d
        self.input_dtype = input_dtype

    @property
    def quantized(self) -> bool:
        return self.input_d is not None

    def quantize_input(self, X: np.ndarray) -> np.ndarray:
        if not self.quantized:
            return np.asarray(X, dtype=np.float64)
        s = np.exp2(self.input_d)
        q = np.clip(np.round(np.asarray(X, dtype=np.float64) / s),
                    self.input_dtype.min, self.input_dtype.max)
        return q

    def forward(self, x_q: np.ndarray) -> tuple[Tensor, Tensor]:
        """Returns (logits, penalty). x_q must be on the input integer grid."""
        x = Tensor(x_q)
        s_x = Tensor(np.exp2(self.input_d)) if self.quantized else Tensor(1.0)
        pen = Tensor(0.0)
        for i, layer in enumerate(self.layers):
            if x.data.shape[1] != layer.in_features:
                raise ValueError(
                    f"layer {i} expects {layer.in_features} features, got {x.data.shape[1]}"
                )
            pre = layer.forward(x, s_x)
            pen = pen + layer.penalty()
            if i < len(self.layers) - 1:
                aq = self.act_quants[i]
                if aq is None:
                    x = pre.relu()
                else:
                    x, s_x = aq.forward(pre)
            else:
                x = pre
        return x, pen

    def predict_logits(self, X: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(self.quantize_input(X))
        return logits.data

    def params(self):
        for i, layer in enumerate(self.layers):
            for name, p, decay in layer.params():
                yield f"layer{i}.{name}", p, decay
        for i, aq in enumerate(self.act_quants):
            if aq is not None:
                yield f"act{i}.d", aq.d, False

    def integer_weights(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            if layer.kind == "float":
                out.append(None)
            else:
                out.append(layer.weight_int().data.astype(np.int64))
        return out


def build_network(
    layer_sizes: list[int],
    quantizer: str,
    weight_bits: int,
    act_bits: int,
    io_bits: int,
    p_star,
    input_d: float,
    input_signed: bool,
    rng: np.random.Generator,
) -> Network:
    """Construct a fresh MLP with He-style init and calibrated quantizers.

    layer_sizes = [in, hidden..., out]. First and last layers use io_bits
    weights; hidden activation quantizers use act_bits (unsigned, post-ReLU).
    p_star may be an int (uniform constraint) or None (baseline/float).
    """
    n_layers = len(layer_sizes) - 1
    layers, acts = [], []
    in_dtype = DType(io_bits, signed=input_signed)
    d_in = input_d
    for i in range(n_layers):
        fan_in, fan_out = layer_sizes[i], layer_sizes[i + 1]
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        first_or_last = i == 0 or i == n_layers - 1
        m_bits = io_bits if first_or_last else weight_bits
        wdtype = DType(m_bits, signed=True)
        if quantizer == "float":
            layers.append(FloatDense(w))
        else:
            amax = np.maximum(np.abs(w).max(axis=1), 1e-12)
            d = np.log2(amax / wdtype.max)
            if quantizer == "wnq":
                t = np.log2(np.maximum(np.abs(w).sum(axis=1), 1e-12))
                constraint = AccumConstraint(P_star=int(p_star), input_dtype=in_dtype)
                layers.append(WNQDense(w, t, d, wdtype, constraint))
            elif quantizer == "baseline":
                layers.append(BaselineDense(w, d, wdtype))
            else:
                raise ValueError(f"unknown quantizer kind {quantizer!r}")
        if i < n_layers - 1:
            n_bits = act_bits
            if quantizer == "float":
                acts.append(None)
            else:
                aq = ActQuant(n_bits, d_init=math.log2(4.0 / (2**n_bits - 1)))
                acts.append(aq)
                in_dtype = aq.dtype
    if quantizer == "float":
        return Network(layers, [None] * (n_layers - 1) if n_layers > 1 else [],
                       None, None)
    return Network(layers, acts, d_in, DType(io_bits, signed=input_signed))
