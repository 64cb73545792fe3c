import struct
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from syndcim import functional as fm
from syndcim.spec_model import BF16, FP4, FP8, INT1, INT2, INT4, INT8

ALL = [INT1, INT2, INT4, INT8, FP4, FP8, BF16]


def test_fp4_value_table():
    vals = [fm.fp_value(c, FP4) for c in range(8)]
    assert vals == [Fraction(x) for x in ("0", "1/2", "1", "3/2", "2", "3", "4", "6")]
    assert fm.fp_value(0xF, FP4) == -6
    assert len(fm.finite_codes(FP4)) == 16


def test_fp8_specials():
    assert fm.fp_value(0x7E, FP8) == 448
    assert fm.fp_value(0x01, FP8) == Fraction(1, 512)
    assert fm.fp_value(0x38, FP8) == 1
    assert not fm.is_finite_code(0x7F, FP8) and not fm.is_finite_code(0xFF, FP8)
    assert len(fm.finite_codes(FP8)) == 254
    with pytest.raises(fm.NonFiniteInput):
        fm.align_fp_to_int([0x38, 0x7F], FP8)


@given(st.integers(0, 0xFFFF))
def test_bf16_matches_float32(code):
    ref = struct.unpack("<f", struct.pack("<I", code << 16))[0]
    if not np.isfinite(ref):
        assert not fm.is_finite_code(code, BF16)
    else:
        assert fm.fp_value(code, BF16) == Fraction(ref)


def test_alignment_example():
    assert fm.align_fp_to_int([0x3C, 0x2C], FP8) == (7, [192, 48])
    assert fm.scale_exponent(7, FP8) == 7 - 7 - 8 + 1


@given(st.sampled_from([FP4, FP8, BF16]), st.data())
def test_alignment_truncates_toward_zero(fmt, data):
    codes = data.draw(st.lists(st.sampled_from(fm.finite_codes(fmt)), min_size=1, max_size=16))
    E, ints = fm.align_fp_to_int(codes, fmt)
    ulp = Fraction(2) ** fm.scale_exponent(E, fmt)
    for c, n in zip(codes, ints):
        exact = fm.fp_value(c, fmt)
        approx = n * ulp
        assert abs(approx) <= abs(exact) and abs(exact - approx) < ulp
        assert abs(n) < 1 << fmt.align_width


def test_output_fusion_examples():
    assert fm.output_fusion([1, 2], 2) == [-3]
    assert fm.output_fusion([5, 0, 0, 0], 4) == [5]
    assert fm.output_fusion([0, 0, 0, 1], 4) == [-8]
    assert fm.output_fusion([1, 1], 1) == [1, 1]
    assert fm.output_fusion([1, 1], 2, signed=False) == [3]
    with pytest.raises(fm.BadGrouping):
        fm.output_fusion([1, 2, 3], 2)
    with pytest.raises(fm.BadGrouping):
        fm.output_fusion([1, 2, 3], 3)


@given(st.sampled_from(ALL), st.sampled_from([1, 2]), st.integers(0, 2**31))
def test_weight_store_roundtrip(p, mcr, seed):
    rng = np.random.default_rng(seed)
    st_ = fm.MacroState(8, 16, mcr)
    sets = [fm.random_weights(st_, p, rng) for _ in range(mcr)]
    for k, w in enumerate(sets):
        st_.load_weights(w, p, k)
    for k, w in enumerate(sets):
        assert np.array_equal(st_.weight_values(p, k), w)


@given(st.sampled_from(ALL), st.sampled_from([8, 16, 32]), st.integers(0, 2**31))
def test_golden_matches_direct_dot(p, H, seed):
    rng = np.random.default_rng(seed)
    state = fm.MacroState(H, 16, 2)
    state.load_weights(fm.random_weights(state, p, rng), p, 1)
    state.sel = 1
    acts = fm.random_activations(H, p, rng)
    res = fm.golden_mac(state, acts, p)
    E, ref = fm.direct_dot(state, acts, p)
    assert list(res.outputs) == ref and res.shared_exponent == E


@given(st.sampled_from([FP4, FP8, BF16]), st.integers(0, 2**31))
def test_fp_error_bound(p, seed):
    rng = np.random.default_rng(seed)
    state = fm.MacroState(16, 16)
    state.load_weights(fm.random_weights(state, p, rng), p)
    acts = fm.random_activations(16, p, rng)
    res = fm.golden_mac(state, acts, p)
    ulp = Fraction(2) ** fm.scale_exponent(res.shared_exponent, p)
    w = state.weight_values(p)
    for g, (got, exact) in enumerate(zip(fm.fp_result(res, p), fm.exact_fp_dot(state, acts, p))):
        assert abs(got - exact) <= ulp * int(np.abs(w[:, g]).sum())


def test_dimension_errors():
    state = fm.MacroState(8, 8)
    with pytest.raises(fm.DimensionMismatch):
        fm.golden_mac(state, [0] * 7, INT4)
    with pytest.raises(fm.DimensionMismatch):
        state.load_weights(np.zeros((8, 3), dtype=int), INT4)
    with pytest.raises(ValueError):
        state.load_weights(np.full((8, 2), 8), INT4)
    with pytest.raises(fm.DimensionMismatch):
        fm.MacroState(8, 8, 1, np.zeros((2, 8, 8), dtype=np.uint8))
    with pytest.raises(ValueError):
        fm.golden_mac(state, [9] * 8, INT4)


def test_hex_vectors_roundtrip(tmp_path):
    cols = [("x", 4), ("y", 9)]
    fm.write_hex_vectors(tmp_path / "v.hex", cols, [[1, -1], [15, 256]])
    got_cols, rows = fm.read_hex_vectors(tmp_path / "v.hex")
    assert got_cols == cols
    assert rows == [[1, 511], [15, 256]]



def test_fp8_codes_match_ml_dtypes():
    ml = pytest.importorskip("ml_dtypes")
    ref = np.arange(256, dtype=np.uint8).view(ml.float8_e4m3fn).astype(np.float64)
    for code, r in enumerate(ref):
        if np.isnan(r):
            assert not fm.is_finite_code(code, FP8)
        else:
            assert fm.fp_value(code, FP8) == Fraction(r)


def test_fp4_codes_match_ml_dtypes():
    ml = pytest.importorskip("ml_dtypes")
    if not hasattr(ml, "float4_e2m1fn"):
        pytest.skip("ml_dtypes without e2m1")
    # sign-magnitude codes: magnitudes ascend with the low three bits
    mags = sorted({float(ml.float4_e2m1fn(v)) for v in np.linspace(0, 6, 25)})
    assert len(mags) == 8
    for code in range(16):
        ref = -mags[code & 7] if code & 8 else mags[code & 7]
        assert fm.fp_value(code, FP4) == Fraction(ref)
