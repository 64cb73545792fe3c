import shutil

import pytest
from hypothesis import given, strategies as st

from syndcim.library import (
    BinLadder, DuplicateKey, ManifestSyntax, MissingKind, NegativeValue, PpaRecord, ScalingRule,
    SubcircuitKind as K, UnknownTopology, enumerate_configs, library_hash, load_library, ofu_stage_count,
    ofu_widths, query, reference_library_path, save_library, scale_ppa,
)
from syndcim.spec_model import FP8, INT4, INT8, MacroSpec


@pytest.fixture
def lib_copy(tmp_path):
    dst = tmp_path / "lib"
    shutil.copytree(reference_library_path(), dst)
    return dst


def test_reference_library_has_every_kind(lib):
    for kind in K:
        assert lib.variants_of(kind), kind
    assert {"FA", "HA", "C42", "NOT"} <= set(lib.cells)


def test_save_load_roundtrip(lib, tmp_path):
    save_library(lib, tmp_path / "copy")
    again = load_library(tmp_path / "copy")
    assert again.variants == lib.variants
    assert again.cells == lib.cells
    assert library_hash(tmp_path / "copy") == again.source_hash


def _append(path, line):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def test_duplicate_row_rejected(lib_copy):
    lines = (lib_copy / "adder_tree.lut").read_text().splitlines()
    _append(lib_copy / "adder_tree.lut", lines[1])
    with pytest.raises(DuplicateKey, match="adder_tree.lut"):
        load_library(lib_copy)


def test_negative_value_rejected(lib_copy):
    _append(lib_copy / "adder_tree.lut", "cmp42_csa,2:1,9999.0,0v9,10.0,-1.0,0.0,1.0")
    with pytest.raises(NegativeValue):
        load_library(lib_copy)


def test_missing_kind_rejected(lib_copy):
    (lib_copy / "shift_add.lut").unlink()
    with pytest.raises(MissingKind):
        load_library(lib_copy)


def test_unknown_topology_rejected(lib_copy):
    m = lib_copy / "manifest.toml"
    m.write_text(m.read_text() + '\n[variants.adder_tree.magic_tree]\nmcr_range = [1, 8]\n')
    with pytest.raises(UnknownTopology):
        load_library(lib_copy)


def test_garbage_manifest(lib_copy):
    (lib_copy / "manifest.toml").write_text("this is = = not toml")
    with pytest.raises(ManifestSyntax):
        load_library(lib_copy)


@given(st.floats(1.0, 1e5))
def test_ladder_snap_is_smallest_bin_above(delay):
    lad = BinLadder()
    b = lad.snap(delay)
    assert b >= delay
    k = 0
    while lad.bin(k) < b:
        k += 1
    assert k == 0 or lad.bin(k - 1) < delay


@given(st.sampled_from([8, 16, 32, 64, 128]), st.sampled_from([8, 16, 32, 64, 128]))
def test_scaling_identity_and_monotone(h, w):
    rec = PpaRecord((32, 32), 500.0, "0v9", 300.0, 100.0, 1.0, 50.0)
    rule = ScalingRule((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0,), 10.0)
    assert scale_ppa(rec, (32, 32), (32, 32), rule) == rec
    out = scale_ppa(rec, (32, 32), (h, w), rule)
    assert out.energy_fj == pytest.approx(100.0 * h * w / 1024)
    assert out.delay_ps <= out.timing_bin_ps
    if h > 32:
        assert out.delay_ps > rec.delay_ps


def test_query_respects_bound_and_order(lib):
    res = query(lib, K.AdderTree, (64, 1), 1, 2000.0, "0v9")
    assert res
    delays = [r.delay_ps for _, r in res]
    assert delays == sorted(delays) and max(delays) <= 2000.0
    assert query(lib, K.AdderTree, (64, 1), 1, 1.0, "0v9") == []


def test_query_filters_mcr(lib):
    topos = {v.topology_id for v, _ in query(lib, K.MultiplierMux, (64, 64, 4), 4, 1e9, "0v9")}
    assert "oai22_fused" not in topos
    assert "oai22_fused" in {v.topology_id for v, _ in query(lib, K.MultiplierMux, (64, 64, 2), 2, 1e9, "0v9")}


def test_enumerate_configs(lib):
    space = enumerate_configs(MacroSpec(64, 64, 2, (INT4, INT8, FP8), 8e8, 1e8), lib)
    assert space.size == len(list(space.configurations()))
    assert K.FpIntAlign in space.axes
    space_int = enumerate_configs(MacroSpec(64, 64, 1, (INT8,), 8e8, 1e8), lib)
    assert K.FpIntAlign not in space_int.axes


def test_ofu_geometry():
    assert [ofu_stage_count(b) for b in (1, 2, 4, 8)] == [0, 1, 2, 3]
    assert ofu_widths(10, 3) == [10, 12, 15, 20]
