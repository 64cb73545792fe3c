import math

import pytest
from hypothesis import given, strategies as st

from syndcim.spec_model import (
    BF16, FORMATS, FP4, FP8, INT1, INT4, INT8, InvalidSpec, MacroSpec, MalformedDocument, Preference,
    format_by_name, parse_spec, serialize_spec, validate_compatibility,
)

BASE = """
[array]
height = 64
width = 64
mcr = 2
[precision]
formats = ["INT4", "FP8"]
[performance]
mac_frequency_hz = 800e6
weight_update_frequency_hz = 100e6
"""


def test_parse_defaults():
    s = parse_spec(BASE)
    assert (s.height, s.width, s.mcr) == (64, 64, 2)
    assert s.precisions == (INT4, FP8)
    assert s.corner == "0v9"
    assert math.isclose(sum(s.preference.as_tuple()), 1.0)
    assert s.activity.input_toggle_rate == 0.5


def test_format_geometry():
    assert (FP8.exponent_bits, FP8.mantissa_bits, FP8.bias) == (4, 3, 7)
    assert (FP4.exponent_bits, FP4.mantissa_bits) == (2, 1)
    assert (BF16.exponent_bits, BF16.mantissa_bits, BF16.bias) == (8, 7, 127)
    assert FP8.align_width == 8 and FP8.input_bits == 9
    assert FP8.weight_bits == 8 and FP4.weight_bits == 4 and BF16.weight_bits == 8
    assert not INT1.signed and INT4.signed
    assert format_by_name("int8") is INT8


@pytest.mark.parametrize("patch,key", [
    ("height = 64", "height = 48"),
    ("height = 64", "height = 4"),
    ("height = 64", "height = 2048"),
    ("mcr = 2", "mcr = 3"),
    ('formats = ["INT4", "FP8"]', 'formats = ["INT4", "INT4"]'),
    ('formats = ["INT4", "FP8"]', 'formats = ["INT3"]'),
    ('formats = ["INT4", "FP8"]', "formats = []"),
    ("mac_frequency_hz = 800e6", "mac_frequency_hz = -1.0"),
    ("mac_frequency_hz = 800e6", 'mac_frequency_hz = "fast"'),
])
def test_invalid_values(patch, key):
    with pytest.raises(InvalidSpec):
        parse_spec(BASE.replace(patch, key))


def test_unknown_key_and_table():
    with pytest.raises(InvalidSpec, match="unknown"):
        parse_spec(BASE + "\n[extra]\nx = 1\n")
    with pytest.raises(InvalidSpec, match="unknown key"):
        parse_spec(BASE.replace("mcr = 2", "mcr = 2\nbanks = 4"))


def test_missing_required():
    with pytest.raises(InvalidSpec, match="missing"):
        parse_spec(BASE.replace("width = 64\n", ""))


def test_malformed_toml():
    with pytest.raises(MalformedDocument):
        parse_spec("[array\nheight = 2")


def test_preference_must_sum_to_one():
    with pytest.raises(InvalidSpec):
        Preference(0.5, 0.5, 0.5)


specs = st.builds(
    MacroSpec,
    height=st.sampled_from([8, 16, 32, 64, 128, 256]),
    width=st.sampled_from([8, 16, 32, 64, 128, 256]),
    mcr=st.sampled_from([1, 2, 4, 8]),
    precisions=st.lists(st.sampled_from(sorted(FORMATS.values())), min_size=1, max_size=4, unique=True).map(tuple),
    mac_frequency_hz=st.floats(1e6, 3e9),
    weight_update_frequency_hz=st.floats(1e6, 3e9),
)


@given(specs)
def test_serialize_roundtrip(spec):
    assert parse_spec(serialize_spec(spec)) == spec


def test_reference_library_is_compatible(lib):
    assert validate_compatibility(parse_spec(BASE), lib) == []


def test_incompatible_corner_is_diagnosed(lib):
    spec = parse_spec(BASE.replace("weight_update_frequency_hz = 100e6", 'weight_update_frequency_hz = 100e6\ncorner = "0v5"'))
    diags = validate_compatibility(spec, lib)
    assert diags and all(d.message for d in diags)
