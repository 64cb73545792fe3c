import random
import re
from dataclasses import replace

import pytest

from helpers import base_designs
from syndcim import rtl, timing as T
from syndcim.library import SubcircuitKind as K
from syndcim.netlist import Netlist, isomorphic, parse_verilog
from syndcim.search import search
from syndcim.spec_model import BF16, FP4, FP8, INT1, INT2, INT4, INT8, MacroSpec


@pytest.fixture(scope="module")
def d16(lib):
    return search(MacroSpec(16, 16, 2, (INT4, FP8), 8e8, 8e8), lib).frontier[0].design


@pytest.mark.parametrize("precs,mcr,H", [
    ((INT1,), 1, 16), ((INT2, INT8), 4, 16), ((FP4, INT4), 2, 16), ((INT8, BF16), 1, 32), ((FP8,), 1, 16),
])
def test_cosim_precision_mixes(lib, precs, mcr, H):
    d = base_designs(lib, H, 16, mcr, precs, limit=1)[0]
    rep = rtl.cosimulate(d, rtl.build_netlist(d), vectors=48, seed=1)
    assert rep.passed, rep.summary()
    assert set(rep.per_precision) == {p.name for p in precs}


@pytest.mark.parametrize("chain", [
    ["retime_adder"], ["split_column"], ["split_column", "split_column"], ["retime_adder", "split_column"],
    ["add_ofu_pipeline", "add_ofu_pipeline"], ["retime_ofu"], ["merge_registers"],
])
def test_cosim_after_transforms(lib, chain):
    d = base_designs(lib, 32, 16, 2, (INT4, FP8), freq=2e8, limit=1)[0]
    for name in chain:
        d = T.TRANSFORMS[name](d)
    assert [e.name for e in d.log] == chain
    rep = rtl.cosimulate(d, rtl.build_netlist(d), vectors=32, seed=2)
    assert rep.passed, rep.summary()


def test_interface(d16):
    itf = rtl.interface(d16)
    assert itf.x_width == 8 and itf.exp_bits == 4 and itf.mant_bits == 3
    assert itf.bit_offset == 2 and itf.sel_bits == 1
    assert itf.result_ports(INT4) == [f"y2_{g}" for g in range(4)]
    assert itf.encode_x(FP8, 0xB9) == 0xB9
    assert itf.encode_x(INT4, -1) == 0xF


def test_fp4_canonical_layout(lib):
    itf = rtl.interface(base_designs(lib, 16, 16, 1, (FP4, FP8), limit=1)[0])
    # FP4 1.10.1 -> sign at bit 7, exponent in bits 3..6, mantissa left-aligned in bits 0..2
    assert itf.encode_x(FP4, 0b1101) == (1 << 7) | (0b10 << 3) | 0b100


def test_emit_parse_isomorphic(d16):
    text = rtl.emit(d16, "dx")
    assert text == rtl.emit(d16, "dx")
    assert text.count(f" {rtl.ALIGN_SCOPE} (") == 1
    back = parse_verilog(text, top="dx_macro")
    assert isomorphic(rtl.build_netlist(d16, "dx_macro"), back)


def test_testbench_detects_corruption(d16):
    nl = rtl.build_netlist(d16, "dx_macro")
    vecs = rtl.golden_vectors(d16, 6, seed=3)
    tb = rtl.emit_testbench(d16, vecs, "dx")
    ok = rtl.run_bench(nl, tb)
    assert ok.failures == 0 and ok.checks == 6
    lines = tb.splitlines()
    i = [k for k, l in enumerate(lines) if l.strip().startswith("`EXPECT(")][2]
    lines[i] = re.sub(r"'h([0-9a-f])", lambda m: "'h" + ("1" if m.group(1) != "1" else "2"), lines[i], count=1)
    bad = rtl.run_bench(nl, "\n".join(lines))
    assert bad.failures == 1 and bad.checks == 6


def test_golden_vectors_seeded(d16):
    a, b = rtl.golden_vectors(d16, 4, seed=9), rtl.golden_vectors(d16, 4, seed=9)
    assert [v.outputs for v in a] == [v.outputs for v in b]
    assert [v.precision for v in a] == ["INT4", "FP8", "INT4", "FP8"]


def test_single_gate_mutation_is_caught(d16):
    nl = rtl.build_netlist(d16, "m")
    rnd = random.Random(5)
    nors = [i for i, g in enumerate(nl.gates) if g.kind == "NOR"]
    idx = rnd.choice(nors)
    gates = list(nl.gates)
    gates[idx] = replace(gates[idx], kind="NAND")
    mutant = Netlist(nl.name, nl.inputs, nl.outputs, gates, nl.clock, nl.scope_modules)
    rep = rtl.cosimulate(d16, mutant, vectors=200, seed=0)
    assert not rep.passed and rep.counterexample


def test_tiny_fixture(lib):
    spec = MacroSpec(2, 1, 1, (INT1,), 8e8, 8e8, dims_check=False)
    d = search(spec, lib).frontier[0].design
    nl = rtl.build_netlist(d, rtl.module_name("t"))
    assert nl.count("FA") + nl.count("HA") > 0
    assert rtl.cosimulate(d, nl, 64).passed
    assert isomorphic(nl, parse_verilog(rtl.emit(d, "t"), top="t_macro"))


def test_unbound_block(lib, d16):
    broken = replace(d16, bindings=tuple(b for b in d16.bindings if b.kind != K.FpIntAlign))
    with pytest.raises(rtl.UnboundBlock):
        rtl.build_netlist(broken)


def test_write_artifacts(tmp_path, d16):
    paths = rtl.write_artifacts(d16, tmp_path, "dq", n_vectors=3)
    assert sorted(paths) == ["macro", "params", "testbench"]
    text = (tmp_path / "dq_macro.v").read_text()
    assert "module dq_macro (" in text
    assert '"design_id": "dq"' in (tmp_path / "dq_params.json").read_text()
