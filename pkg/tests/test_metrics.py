"""Sparsity, entropy, and compression-rate measurements."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accguard.metrics import (
    compression_rate,
    entropy,
    model_stats,
    sparsity,
    tensor_stats,
)
from accguard.qcore import DType, IntTensor

from test_infer import single_neuron_ckpt

I4 = DType(4, signed=True)


class TestSparsity:
    def test_three_quarters(self):
        assert sparsity(IntTensor([0, 0, 1, 0], I4)) == 0.75

    def test_all_zeros(self):
        assert sparsity(IntTensor([0, 0], I4)) == 1.0

    def test_no_zeros(self):
        assert sparsity(IntTensor([1, -1, 3], I4)) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sparsity(IntTensor(np.zeros((0,)), I4))


class TestEntropy:
    def test_constant_tensor(self):
        assert entropy(IntTensor([5, 5, 5], I4)) == 0.0

    def test_fair_binary(self):
        assert entropy(IntTensor([0, 0, 1, 1], I4)) == 1.0

    def test_uniform_sixteen(self):
        assert entropy(IntTensor(np.arange(-8, 8), I4)) == pytest.approx(4.0)


class TestCompressionRate:
    def test_eight_over_one(self):
        w = IntTensor([0, 0, 1, 1], DType(8, signed=True))
        assert compression_rate(w, 8) == 8.0

    def test_infinite_at_zero_entropy(self):
        assert compression_rate(IntTensor([3, 3], I4), 8) == float("inf")

    def test_incompressible_uniform(self):
        assert compression_rate(IntTensor(np.arange(-8, 8), I4), 4) == pytest.approx(1.0)


def binary_entropy(p):
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


class TestInvariants:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-8, 7), min_size=1, max_size=100))
    def test_entropy_bounds(self, vals):
        w = IntTensor(vals, I4)
        h = entropy(w)
        assert 0.0 <= h <= min(4.0, math.log2(len(set(vals))) + 1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-8, 7), min_size=1, max_size=100))
    def test_sparse_alphabet_bound(self, vals):
        # Splitting off the zero symbol: H <= H(sparsity) + (1-s)*log2(2^M - 1)
        w = IntTensor(vals, I4)
        s = sparsity(w)
        bound = binary_entropy(s) + (1 - s) * math.log2(2**4 - 1)
        assert entropy(w) <= bound + 1e-9


class TestAggregation:
    def test_tensor_stats_fields(self):
        st_ = tensor_stats(IntTensor([0, 0, 1, 1], DType(8, signed=True)), 8)
        assert st_.sparsity == 0.5
        assert st_.entropy_bits == 1.0
        assert st_.compression_rate == 8.0
        assert st_.relative_performance is None

    def test_model_stats_size_weighted(self):
        ckpt = single_neuron_ckpt([0, 0, 1, 1])
        big = single_neuron_ckpt(list(np.arange(-8, 8)))
        ckpt.layers.append(big.layers[0])
        st_ = model_stats(ckpt)
        # sizes 4 and 16: weights 0.2 / 0.8; the 16-value layer has one zero
        assert st_.sparsity == pytest.approx(0.2 * 0.5 + 0.8 * (1 / 16))
        assert st_.entropy_bits == pytest.approx(0.2 * 1.0 + 0.8 * 4.0)
        assert st_.compression_rate == pytest.approx(8.0 / st_.entropy_bits)

    def test_model_stats_on_trained(self, wnq_checkpoint):
        st_ = model_stats(wnq_checkpoint)
        assert 0.0 <= st_.sparsity <= 1.0
        assert st_.entropy_bits >= 0.0
        assert st_.compression_rate >= 1.0
