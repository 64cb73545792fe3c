import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from syndcim.netlist import (
    CONST0, CONST1, CombinationalLoop, Gate, MultipleDrivers, Netlist, NetlistBuilder, ParseError, UndrivenNet,
    CompiledNetlist, emit_verilog, isomorphic, parse_verilog, simulate_netlist,
)

# truth functions written independently of the simulator's expression table
TRUTH = {
    "AND": lambda a, b: [a and b],
    "OR": lambda a, b: [a or b],
    "XOR": lambda a, b: [a != b],
    "NAND": lambda a, b: [not (a and b)],
    "NOR": lambda a, b: [not (a or b)],
    "NOT": lambda a: [not a],
    "MUX2": lambda a, b, s: [b if s else a],
    "HA": lambda a, b: [a != b, a and b],
    "FA": lambda a, b, c: [(a + b + c) % 2 == 1, a + b + c >= 2],
}


def reference_sim(nl, stimulus):
    """Fixpoint evaluation with one boolean per net; DFFs update after sampling."""
    state = {g.outputs[0]: False for g in nl.gates if g.kind == "DFF"}
    inputs = {}
    trace = []
    for cyc in stimulus:
        for p, v in cyc.items():
            for k in range(nl.input_width(p)):
                inputs[f"{p}[{k}]"] = bool((v >> k) & 1)
        val = {CONST0: False, CONST1: True, **inputs, **state}
        pending = [g for g in nl.gates if g.kind != "DFF"]
        while pending:
            rest = []
            for g in pending:
                if all(n in val for n in g.inputs):
                    for n, r in zip(g.outputs, TRUTH[g.kind](*[val[n] for n in g.inputs])):
                        val[n] = bool(r)
                else:
                    rest.append(g)
            assert len(rest) < len(pending)
            pending = rest
        trace.append({p: sum(int(val[n]) << k for k, n in enumerate(nets)) for p, nets in nl.outputs})
        state = {g.outputs[0]: val[g.inputs[0]] for g in nl.gates if g.kind == "DFF"}
    return trace


def random_netlist(seed, n_gates=40, scoped=True):
    rnd = random.Random(seed)
    b = NetlistBuilder("rnd")
    nets = b.input("a", 4) + b.input("b", 3)
    regs = []
    for i in range(n_gates):
        b.scope = rnd.choice(["", "u_x", "u_y"]) if scoped else ""
        kind = rnd.choice(["AND", "OR", "XOR", "NAND", "NOR", "NOT", "MUX2", "HA", "FA", "DFF", "FB"])
        if kind == "FB":
            q = b.reserve_dff("fb")
            regs.append(q)
            nets.append(q)
            continue
        if kind == "DFF":
            nets.append(b.gate("DFF", rnd.choice(nets))[0])
            continue
        from syndcim.netlist import PRIMITIVES
        ins = [rnd.choice(nets) for _ in PRIMITIVES[kind][0]]
        nets.extend(b.gate(kind, *ins))
    b.scope = ""
    for q in regs:
        b.close_dff(q, rnd.choice(nets))
    b.output("y", [rnd.choice(nets) for _ in range(6)])
    b.output("z", nets[-3:])
    return b.build()


def random_stimulus(seed, cycles=12):
    rnd = random.Random(seed)
    return [{"a": rnd.randrange(16), "b": rnd.randrange(8)} for _ in range(cycles)]


@given(st.integers(0, 10**6))
def test_simulator_matches_reference(seed):
    nl = random_netlist(seed)
    stim = random_stimulus(seed)
    assert simulate_netlist(nl, stim) == reference_sim(nl, stim)


@given(st.integers(0, 10**6))
def test_lanes_are_independent(seed):
    nl = random_netlist(seed)
    stims = [random_stimulus(seed + k) for k in range(5)]
    lanes = [{p: np.array([s[c][p] for s in stims]) for p in ("a", "b")} for c in range(12)]
    res = CompiledNetlist(nl).run(lanes, lanes=5)
    for k, s in enumerate(stims):
        single = simulate_netlist(nl, s)
        assert [{p: int(v[k]) for p, v in r.items()} for r in res] == single


@given(st.integers(0, 10**6))
def test_verilog_roundtrip_isomorphic(seed):
    nl = random_netlist(seed)
    text = emit_verilog(nl)
    back = parse_verilog(text, top="rnd")
    assert isomorphic(nl, back)
    stim = random_stimulus(seed)
    assert simulate_netlist(back, stim) == simulate_netlist(nl, stim)
    assert emit_verilog(nl) == text


def test_isomorphism_ignores_names_but_not_structure():
    nl = random_netlist(3, scoped=False)
    ren = {n: f"w{i}" for i, n in enumerate(sorted({n for g in nl.gates for n in g.outputs}))}
    renamed = Netlist(
        nl.name, list(nl.inputs), [(p, tuple(ren.get(n, n) for n in nets)) for p, nets in nl.outputs],
        [replace(g, name=f"k{i}", inputs=tuple(ren.get(n, n) for n in g.inputs),
                 outputs=tuple(ren[n] for n in g.outputs)) for i, g in enumerate(reversed(nl.gates))],
    )
    assert isomorphic(nl, renamed)
    idx = next(i for i, g in enumerate(nl.gates) if g.kind == "AND")
    mutated = Netlist(nl.name, nl.inputs, nl.outputs,
                      [replace(g, kind="OR") if i == idx else g for i, g in enumerate(nl.gates)])
    assert not isomorphic(nl, mutated)


def test_adder_builder(lanes=64):
    b = NetlistBuilder("add")
    x, y = b.input("x", 6), b.input("y", 6)
    s, c = b.add(x, y)
    b.output("s", s + [c])
    nl = b.build()
    rng = np.random.default_rng(1)
    xv, yv = rng.integers(0, 64, lanes), rng.integers(0, 64, lanes)
    out = CompiledNetlist(nl).run([{"x": xv, "y": yv}], lanes=lanes)[0]["s"]
    assert np.array_equal(out, xv + yv)


def test_constant_folding():
    b = NetlistBuilder("f")
    a = b.input("a", 1)[0]
    assert b.AND(a, CONST0) == CONST0 and b.OR(a, CONST0) == a
    assert b.MUX(a, a, "whatever") == a
    assert b.FA(a, CONST0, CONST0) == (a, CONST0)
    assert b.DFF(CONST0) == CONST0
    assert b.DFF(a) == b.DFF(a)
    assert b.nl.count("DFF") == 1


def test_validation_errors():
    with pytest.raises(UndrivenNet):
        Netlist("u", [("a", 1)], [("y", ("n1",))], [Gate("g", "NOT", ("n0",), ("n1",))]).validate()
    with pytest.raises(MultipleDrivers):
        Netlist("m", [("a", 1)], [], [Gate("g", "NOT", ("a[0]",), ("n",)), Gate("h", "NOT", ("a[0]",), ("n",))]).validate()
    with pytest.raises(CombinationalLoop):
        Netlist("l", [("a", 1)], [], [Gate("g", "AND", ("a[0]", "m"), ("n",)), Gate("h", "NOT", ("n",), ("m",))]).validate()
    b = NetlistBuilder("r")
    b.reserve_dff()
    with pytest.raises(UndrivenNet):
        b.build()


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_verilog("module m (input a); frobnicate g (a); endmodule")
    with pytest.raises(ParseError):
        parse_verilog("not a verilog file")


def test_scoped_modules_emitted():
    nl = random_netlist(11)
    text = emit_verilog(nl, header="hello")
    assert text.startswith("// hello")
    assert "module rnd_u_x (" in text and "module rnd_u_y (" in text
    assert "rnd_u_x u_x (" in text
