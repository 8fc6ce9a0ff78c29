"""Closed-form worst-case input construction for overflow certification.

For a fixed weight row the input that maximizes the accumulator
excursion is sign-aligned: every product takes the same sign with
maximal magnitude, so partial sums are monotone and the final sum is the
per-direction worst case over the whole input dtype range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .infer import AccumulatorSpec
from .qcore import DType, IntTensor
from .serde import ModelCheckpoint


@dataclass
class AttackResult:
    input: np.ndarray  # the sign-aligned input achieving the peak
    peak: int  # max |partial sum| reached
    required_bits: int  # ceil(log2(peak+1)) + 1
    overflowed: bool  # at the target accumulator width
    excursion: int = 0  # max distance of any partial sum outside the range


def sign_aligned_input(
    w: IntTensor, input_dtype: DType, direction: str = "positive"
) -> IntTensor:
    """Worst-case input pushing the dot product in the given direction."""
    if direction not in ("positive", "negative"):
        raise ValueError("direction must be 'positive' or 'negative'")
    w_arr = w.data
    want = 1 if direction == "positive" else -1
    if input_dtype.signed:
        lo, hi = input_dtype.min, input_dtype.max
        # Pick the extreme whose product with w_i has the target sign and
        # maximal magnitude; -2^(N-1) beats 2^(N-1)-1 where signs allow.
        x = np.where(np.sign(w_arr) == want, hi, lo)
        x = np.where(w_arr == 0, 0, x)
    else:
        x = np.where(np.sign(w_arr) == want, input_dtype.max, 0)
    return IntTensor(x.astype(np.int64), input_dtype)


def _peak_for(w: IntTensor, input_dtype: DType, spec: AccumulatorSpec):
    """Run both directions through the exact partial-sum chain."""
    best = AttackResult(np.zeros(len(w), dtype=np.int64), 0, 1, False)
    overflowed = False
    excursion = 0
    for direction in ("positive", "negative"):
        x = sign_aligned_input(w, input_dtype, direction)
        partial = np.cumsum(x.data * w.data)
        peak = int(np.abs(partial).max(initial=0))
        exc = int(
            np.maximum(
                np.maximum(partial - spec.max, spec.min - partial), 0
            ).max(initial=0)
        )
        overflowed = overflowed or exc > 0
        excursion = max(excursion, exc)
        if peak > best.peak:
            best = AttackResult(
                input=x.data.copy(),
                peak=peak,
                required_bits=max(2, peak.bit_length() + 1),
                overflowed=False,
            )
    best.overflowed = overflowed
    best.excursion = excursion
    return best


def attack_model(
    model: ModelCheckpoint, specs: list[AccumulatorSpec] | None = None
) -> list[list[AttackResult]]:
    """Layer-local certification: per-layer, per-neuron worst-case results.

    Each layer is attacked directly over its full input dtype range;
    upstream layers are bypassed on purpose, because the guarantee is
    stated for the whole declared range, not just reachable activations.
    """
    if specs is None:
        specs = [AccumulatorSpec(rec.acc_bits, "wide") for rec in model.layers]
    if len(specs) != len(model.layers):
        raise ValueError("need one AccumulatorSpec per layer")
    results = []
    for rec, spec in zip(model.layers, specs):
        in_dtype = rec.input_dtype
        wdtype = rec.weight_dtype
        layer_results = [
            _peak_for(IntTensor(row, wdtype), in_dtype, spec) for row in rec.w_int
        ]
        results.append(layer_results)
    return results


def total_attack_overflows(results: list[list[AttackResult]]) -> int:
    return sum(r.overflowed for layer in results for r in layer)


def fuzz_overflows(
    model: ModelCheckpoint,
    n_inputs: int,
    seed: int = 0,
    specs: list[AccumulatorSpec] | None = None,
):
    """Random-input overflow counting through the full integer pipeline."""
    rng = np.random.default_rng(seed)
    dt = model.input_dtype
    x = rng.integers(dt.min, dt.max + 1, size=(n_inputs, model.layers[0].in_features))
    from .infer import run_int

    _, report = run_int(model, IntTensor(x, dt), specs=specs, mode="wide")
    return report
