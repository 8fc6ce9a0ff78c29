"""Integer tensors and the affine quantize/dequantize operators."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from accguard.qcore import (
    DType,
    IntTensor,
    QuantSpec,
    clip,
    dequantize,
    quantize,
    round_half,
    round_to_zero,
)


class TestDType:
    def test_signed_range(self):
        dt = DType(4, signed=True)
        assert (dt.min, dt.max) == (-8, 7)

    def test_unsigned_range(self):
        dt = DType(4, signed=False)
        assert (dt.min, dt.max) == (0, 15)

    def test_sign_bit_indicator(self):
        assert DType(8, signed=True).sign_bit == 1
        assert DType(8, signed=False).sign_bit == 0

    def test_bits_bounds(self):
        with pytest.raises(ValueError):
            DType(0)
        with pytest.raises(ValueError):
            DType(65)
        DType(1)
        DType(64)

    def test_contains(self):
        dt = DType(4, signed=True)
        assert dt.contains([-8, 0, 7])
        assert not dt.contains([8])
        assert not dt.contains([-9])
        assert dt.contains([])

    def test_str(self):
        assert str(DType(8, signed=True)) == "int8"
        assert str(DType(4, signed=False)) == "uint4"


class TestIntTensor:
    def test_range_validated(self):
        with pytest.raises(ValueError):
            IntTensor([16], DType(4, signed=False))
        t = IntTensor([0, 15], DType(4, signed=False))
        assert t.shape == (2,)

    def test_immutable(self):
        t = IntTensor([1, 2], DType(4))
        with pytest.raises(ValueError):
            t.data[0] = 5


class TestClip:
    def test_saturates_at_p(self):
        assert clip(100, -8, 7) == 7

    def test_saturates_at_n(self):
        assert clip(-9, -8, 7) == -8

    def test_identity_in_range(self):
        assert clip(3, -8, 7) == 3

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError):
            clip(0, 5, 4)


class TestRounding:
    def test_round_half_nearest(self):
        assert round_half(2.7) == 3

    def test_half_to_even_ties(self):
        # Tie-break convention: half-way cases go to the even integer.
        assert round_half(2.5) == 2
        assert round_half(-2.5) == -2
        assert round_half(3.5) == 4
        assert round_half(0.5) == 0

    def test_round_to_zero(self):
        assert round_to_zero(2.9) == 2
        assert round_to_zero(-2.9) == -2
        assert round_to_zero(0.0) == 0

    @given(st.floats(-1e6, 1e6))
    def test_trunc_never_increases_magnitude(self, x):
        assert abs(round_to_zero(x)) <= abs(x)


class TestQuantize:
    def test_basic(self):
        q = QuantSpec(d=0.0, dtype=DType(4, signed=True))
        assert quantize(2.7, q).data == 3

    def test_clipped_at_p(self):
        q = QuantSpec(d=0.0, dtype=DType(4, signed=True))
        assert quantize(100.0, q).data == 7

    def test_fractional_scale(self):
        q = QuantSpec(d=-1.0, dtype=DType(4, signed=True))  # s = 0.5
        assert quantize(-1.2, q).data == -2  # round(-2.4) = -2

    def test_non_finite_rejected_with_index(self):
        q = QuantSpec(d=0.0, dtype=DType(4, signed=True))
        with pytest.raises(ValueError, match=r"\(0, 1\)"):
            quantize([[1.0, np.nan], [2.0, 3.0]], q)

    def test_unknown_mode(self):
        q = QuantSpec(d=0.0, dtype=DType(4))
        with pytest.raises(ValueError):
            quantize(1.0, q, mode="stochastic")

    def test_to_zero_mode(self):
        q = QuantSpec(d=0.0, dtype=DType(4, signed=True))
        assert quantize(-2.9, q, mode="to_zero").data == -2

    def test_non_finite_scale_rejected(self):
        with pytest.raises(ValueError):
            QuantSpec(d=float("inf"), dtype=DType(4))


class TestDequantize:
    def test_basic(self):
        q = QuantSpec(d=-1.0, dtype=DType(4, signed=True))
        t = IntTensor([3], q.dtype)
        assert dequantize(t, q)[0] == 1.5

    def test_extreme(self):
        q = QuantSpec(d=1.0, dtype=DType(4, signed=True))
        t = IntTensor([-8], q.dtype)
        assert dequantize(t, q)[0] == -16.0

    def test_dtype_mismatch(self):
        q = QuantSpec(d=0.0, dtype=DType(4, signed=True))
        t = IntTensor([1], DType(8, signed=True))
        with pytest.raises(ValueError):
            dequantize(t, q)


class TestProperties:
    @given(
        st.floats(-100, 100),
        st.integers(-3, 3),
        st.sampled_from([(4, True), (8, True), (4, False)]),
    )
    def test_round_trip_error_bound(self, x, d, dtspec):
        bits, signed = dtspec
        q = QuantSpec(d=float(d), dtype=DType(bits, signed=signed))
        s = q.scale
        clipped = clip(x, s * q.dtype.min, s * q.dtype.max)
        back_half = dequantize(quantize(x, q, "half"), q)
        back_zero = dequantize(quantize(x, q, "to_zero"), q)
        assert abs(back_half - clipped) <= s / 2 + 1e-12
        assert abs(back_zero - clipped) <= s + 1e-12

    @given(st.integers(-5, 5))
    def test_zero_preserved_and_idempotent(self, d):
        q = QuantSpec(d=float(d), dtype=DType(8, signed=True))
        assert dequantize(quantize(0.0, q), q) == 0.0
        on_grid = 3 * q.scale
        assert quantize(on_grid, q).data == 3
