"""Gate-level netlists: construction, cycle simulation, Verilog round trip, isomorphism.

Nets are bit-level strings.  Port bits are named ``port[k]``; the constants are
``1'b0`` and ``1'b1``.  Gates belong to an optional scope (a sub-module instance
name); nets local to a scope are named ``<scope>__<local>``.

Simulation is lane parallel: every net value is a Python integer whose bit
``l`` is the value in lane ``l``, so one pass evaluates many independent
stimulus streams that share a control schedule.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

CONST0 = "1'b0"
CONST1 = "1'b1"
CONSTS = (CONST0, CONST1)
SEP = "__"  # scope separator inside flattened names

# kind -> (input pins, output pins)
PRIMITIVES = {
    "NAND": (("a", "b"), ("y",)),
    "NOR": (("a", "b"), ("y",)),
    "AND": (("a", "b"), ("y",)),
    "OR": (("a", "b"), ("y",)),
    "XOR": (("a", "b"), ("y",)),
    "NOT": (("a",), ("y",)),
    "MUX2": (("a", "b", "s"), ("y",)),  # y = s ? b : a
    "FA": (("a", "b", "ci"), ("s", "co")),
    "HA": (("a", "b"), ("s", "co")),
    "DFF": (("d",), ("q",)),
}
VERILOG_BUILTIN = {"NAND": "nand", "NOR": "nor", "AND": "and", "OR": "or", "XOR": "xor", "NOT": "not"}
CELL_MODULE = {"MUX2": "SYN_MUX2", "FA": "SYN_FA", "HA": "SYN_HA", "DFF": "SYN_DFF"}


class NetlistError(Exception):
    pass


class CombinationalLoop(NetlistError):
    pass


class UndrivenNet(NetlistError):
    pass


class MultipleDrivers(NetlistError):
    pass


class ParseError(NetlistError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    kind: str
    inputs: tuple  # nets, in PRIMITIVES pin order
    outputs: tuple
    scope: str = ""
    attrs: tuple = ()  # ((key, value), ...)


@dataclass
class Netlist:
    name: str
    inputs: list = field(default_factory=list)  # [(port, width)]
    outputs: list = field(default_factory=list)  # [(port, (nets...))]
    gates: list = field(default_factory=list)
    clock: str = "clk"
    scope_modules: dict = field(default_factory=dict)  # scope -> module name

    def input_nets(self) -> set:
        return {f"{p}[{k}]" for p, w in self.inputs for k in range(w)}

    def input_width(self, port: str) -> int:
        return dict(self.inputs)[port]

    def output_map(self) -> dict:
        return dict(self.outputs)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def drivers(self) -> dict:
        drv = {}
        for g in self.gates:
            for n in g.outputs:
                if n in drv or n in CONSTS:
                    raise MultipleDrivers(f"net {n} driven more than once")
                drv[n] = g
        for n in self.input_nets():
            if n in drv:
                raise MultipleDrivers(f"input net {n} also driven by gate {drv[n].name}")
        return drv

    def validate(self) -> None:
        """Raise if a net is undriven, multiply driven, or the logic has a cycle."""
        drv = self.drivers()
        known = set(drv) | self.input_nets() | set(CONSTS)
        for g in self.gates:
            for n in g.inputs:
                if n not in known:
                    raise UndrivenNet(f"net {n} (input of {g.name}) has no driver")
        for p, nets in self.outputs:
            for n in nets:
                if n not in known:
                    raise UndrivenNet(f"output {p} uses undriven net {n}")
        _topo_order(self, drv)


def _topo_order(nl: Netlist, drv: dict) -> list:
    comb = [g for g in nl.gates if g.kind != "DFF"]
    indeg = {}
    users = defaultdict(list)
    for g in comb:
        deps = {drv[n].name for n in g.inputs if n in drv and drv[n].kind != "DFF"}
        indeg[g.name] = len(deps)
        for d in deps:
            users[d].append(g)
    by_name = {g.name: g for g in comb}
    ready = [g for g in comb if indeg[g.name] == 0]
    order = []
    while ready:
        g = ready.pop()
        order.append(g)
        for u in users[g.name]:
            indeg[u.name] -= 1
            if indeg[u.name] == 0:
                ready.append(u)
    if len(order) != len(comb):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CombinationalLoop(f"combinational loop through {len(stuck)} gates, e.g. {by_name[stuck[0]].name}")
    return order


# -- construction -------------------------------------------------------------------------------


class NetlistBuilder:
    """Incremental construction with light constant folding."""

    def __init__(self, name: str, clock: str = "clk"):
        self.nl = Netlist(name, clock=clock)
        self.scope = ""
        self._n = defaultdict(int)
        self._reg_cache: dict = {}
        self._pending: dict = {}

    # naming
    def fresh(self, hint: str = "n") -> str:
        key = (self.scope, hint)
        i = self._n[key]
        self._n[key] += 1
        local = f"{hint}{i}"
        return f"{self.scope}{SEP}{local}" if self.scope else local

    def input(self, port: str, width: int) -> list:
        self.nl.inputs.append((port, width))
        return [f"{port}[{k}]" for k in range(width)]

    def output(self, port: str, nets) -> None:
        self.nl.outputs.append((port, tuple(nets)))

    def gate(self, kind: str, *ins, hint: str | None = None, attrs: tuple = ()) -> tuple:
        n_out = len(PRIMITIVES[kind][1])
        name = self.fresh("g_" + (hint or kind.lower()) + "_")
        outs = tuple(self.fresh((hint or kind.lower()) + "_") for _ in range(n_out))
        self.nl.gates.append(Gate(name, kind, tuple(ins), outs, self.scope, attrs))
        return outs

    # folded primitives
    def NOT(self, a):
        if a in CONSTS:
            return CONST1 if a == CONST0 else CONST0
        return self.gate("NOT", a)[0]

    def AND(self, a, b):
        if CONST0 in (a, b):
            return CONST0
        if a == CONST1:
            return b
        if b == CONST1:
            return a
        return self.gate("AND", a, b)[0]

    def OR(self, a, b):
        if CONST1 in (a, b):
            return CONST1
        if a == CONST0:
            return b
        if b == CONST0:
            return a
        return self.gate("OR", a, b)[0]

    def XOR(self, a, b):
        if a == CONST0:
            return b
        if b == CONST0:
            return a
        if a == CONST1:
            return self.NOT(b)
        if b == CONST1:
            return self.NOT(a)
        return self.gate("XOR", a, b)[0]

    def NAND(self, a, b):
        if a in CONSTS or b in CONSTS:
            return self.NOT(self.AND(a, b))
        return self.gate("NAND", a, b)[0]

    def NOR(self, a, b):
        if a in CONSTS or b in CONSTS:
            return self.NOT(self.OR(a, b))
        return self.gate("NOR", a, b)[0]

    def MUX(self, a, b, s):
        """s ? b : a"""
        if s == CONST0 or a == b:
            return a
        if s == CONST1:
            return b
        if a == CONST0 and b == CONST1:
            return s
        if a == CONST0:
            return self.AND(s, b)
        if b == CONST0:
            return self.AND(self.NOT(s), a)
        return self.gate("MUX2", a, b, s)[0]

    def HA(self, a, b):
        if a in CONSTS and b in CONSTS:
            v = (a == CONST1) + (b == CONST1)
            return (CONST1 if v & 1 else CONST0, CONST1 if v >> 1 else CONST0)
        if a == CONST0:
            return b, CONST0
        if b == CONST0:
            return a, CONST0
        if a == CONST1:
            return self.NOT(b), b
        if b == CONST1:
            return self.NOT(a), a
        return self.gate("HA", a, b)

    def FA(self, a, b, c):
        ins = [a, b, c]
        consts = [x for x in ins if x in CONSTS]
        if not consts:
            return self.gate("FA", a, b, c)
        rest = [x for x in ins if x not in CONSTS]
        ones = sum(1 for x in consts if x == CONST1)
        if len(rest) == 2:
            if ones == 0:
                return self.HA(*rest)
            # a + b + 1: sum = xnor, carry = or
            return self.NOT(self.XOR(*rest)), self.OR(*rest)
        if len(rest) == 1:
            x = rest[0]
            if ones == 0:
                return x, CONST0
            if ones == 1:
                return self.NOT(x), x
            return x, CONST1
        v = ones
        return (CONST1 if v & 1 else CONST0, CONST1 if v >> 1 else CONST0)

    def DFF(self, d, attrs: tuple = ()):
        if d == CONST0 and not attrs:
            return CONST0  # registers start cleared
        if not attrs and d in self._reg_cache:
            return self._reg_cache[d]
        q = self.gate("DFF", d, hint="r" if not attrs else "cell", attrs=attrs)[0]
        if not attrs:
            self._reg_cache[d] = q
        return q

    def reserve_dff(self, hint: str = "s", attrs: tuple = ()) -> str:
        """Output net of a register whose input is connected later (feedback loops)."""
        name = self.fresh("g_" + hint + "_")
        q = self.fresh(hint + "_")
        self._pending[q] = (name, self.scope, attrs)
        return q

    def close_dff(self, q: str, d: str) -> None:
        name, scope, attrs = self._pending.pop(q)
        self.nl.gates.append(Gate(name, "DFF", (d,), (q,), scope, attrs))

    def alias_register(self, d, q) -> None:
        """Declare that ``q`` already holds ``d`` one cycle late (reuse for later DFF calls)."""
        self._reg_cache[d] = q

    def delay(self, d, cycles: int):
        for _ in range(cycles):
            d = self.DFF(d)
        return d

    # multi-bit helpers
    def or_reduce(self, nets):
        nets = [n for n in nets if n != CONST0]
        if not nets:
            return CONST0
        while len(nets) > 1:
            nxt = [self.OR(a, b) for a, b in zip(nets[0::2], nets[1::2])]
            if len(nets) % 2:
                nxt.append(nets[-1])
            nets = nxt
        return nets[0]

    def add(self, a, b, cin=CONST0, width: int | None = None):
        """Ripple sum of two little-endian bit vectors (already extended to ``width``)."""
        width = width or max(len(a), len(b))
        out = []
        c = cin
        for k in range(width):
            x = a[k] if k < len(a) else CONST0
            y = b[k] if k < len(b) else CONST0
            s, c = self.FA(x, y, c)
            out.append(s)
        return out, c

    def build(self) -> Netlist:
        if self._pending:
            raise UndrivenNet(f"register {next(iter(self._pending))} was never connected")
        self.nl.validate()
        return self.nl


def sign_extend(bits, width: int):
    bits = list(bits)
    if len(bits) >= width:
        return bits[:width]
    return bits + [bits[-1]] * (width - len(bits))


def zero_extend(bits, width: int):
    bits = list(bits)
    return bits[:width] + [CONST0] * (width - len(bits))


# -- simulation ------------------------------------------------------------------------------------


def _expr(kind: str, a: list) -> list:
    if kind == "AND":
        return [f"{a[0]} & {a[1]}"]
    if kind == "OR":
        return [f"{a[0]} | {a[1]}"]
    if kind == "XOR":
        return [f"{a[0]} ^ {a[1]}"]
    if kind == "NAND":
        return [f"M ^ ({a[0]} & {a[1]})"]
    if kind == "NOR":
        return [f"M ^ ({a[0]} | {a[1]})"]
    if kind == "NOT":
        return [f"M ^ {a[0]}"]
    if kind == "MUX2":
        return [f"({a[0]} & (M ^ {a[2]})) | ({a[1]} & {a[2]})"]
    if kind == "HA":
        return [f"{a[0]} ^ {a[1]}", f"{a[0]} & {a[1]}"]
    if kind == "FA":
        return [f"{a[0]} ^ {a[1]} ^ {a[2]}", f"({a[0]} & {a[1]}) | ({a[2]} & ({a[0]} ^ {a[1]}))"]
    raise NetlistError(f"unknown gate kind {kind}")


class CompiledNetlist:
    """Netlist compiled to straight-line Python for lane-parallel cycle simulation."""

    def __init__(self, netlist: Netlist):
        netlist.validate()
        drv = netlist.drivers()
        order = _topo_order(netlist, drv)
        self.netlist = netlist
        idx = {CONST0: 0, CONST1: 1}
        for p, w in netlist.inputs:
            for k in range(w):
                idx[f"{p}[{k}]"] = len(idx)
        self.dffs = [g for g in netlist.gates if g.kind == "DFF"]
        for g in self.dffs:
            idx[g.outputs[0]] = len(idx)
        for g in order:
            for n in g.outputs:
                idx[n] = len(idx)
        self.idx = idx
        lines = ["def settle(v, M):"]
        for g in order:
            args = [f"v[{idx[n]}]" for n in g.inputs]
            for n, e in zip(g.outputs, _expr(g.kind, args)):
                lines.append(f"    v[{idx[n]}] = {e}")
        lines.append("    return v")
        lines.append("def clock(v):")
        if self.dffs:
            qs = ", ".join(f"v[{idx[g.outputs[0]]}]" for g in self.dffs)
            ds = ", ".join(f"v[{idx[g.inputs[0]]}]" for g in self.dffs)
            lines.append(f"    {qs}{',' if len(self.dffs) == 1 else ''} = {ds}{',' if len(self.dffs) == 1 else ''}")
        lines.append("    return v")
        ns: dict = {}
        exec(compile("\n".join(lines), f"<netlist {netlist.name}>", "exec"), ns)
        self._settle = ns["settle"]
        self._clock = ns["clock"]
        self.size = len(idx)

    def run(self, stimulus, cycles: int | None = None, lanes: int = 1, sample=None) -> list:
        """Simulate; ``stimulus[c]`` maps ports to a value or a per-lane array.

        Ports missing from a cycle keep their previous value (initially zero).
        Returns the per-cycle outputs (``{port: array}``) for cycles in ``sample``
        (all cycles when ``sample`` is None).
        """
        cycles = len(stimulus) if cycles is None else cycles
        M = (1 << lanes) - 1
        v = [0] * self.size
        v[1] = M
        widths = dict(self.netlist.inputs)
        outs = self.netlist.outputs
        want = None if sample is None else set(sample)
        result = []
        for c in range(cycles):
            if c < len(stimulus):
                for port, val in stimulus[c].items():
                    if port not in widths:
                        raise NetlistError(f"stimulus drives unknown port {port}")
                    for k, bits in enumerate(_lane_bits(val, widths[port], lanes)):
                        v[self.idx[f"{port}[{k}]"]] = bits
            self._settle(v, M)
            if want is None or c in want:
                result.append({p: _lane_values([v[self.idx[n]] for n in nets], lanes) for p, nets in outs})
            else:
                result.append(None)
            self._clock(v)
        return result


def _lane_bits(val, width: int, lanes: int) -> list:
    if np.ndim(val) == 0:
        x = int(val)
        M = (1 << lanes) - 1
        return [M if (x >> k) & 1 else 0 for k in range(width)]
    arr = np.asarray(val)
    if arr.ndim == 2:
        # per-lane bit matrix [lanes][width], for ports wider than an int64
        if arr.shape != (lanes, width):
            raise NetlistError(f"bit-matrix stimulus has shape {arr.shape}, expected ({lanes}, {width})")
        bits = np.ascontiguousarray(arr.T.astype(np.uint8))
        return [int.from_bytes(np.packbits(bits[k], bitorder="little").tobytes(), "little") for k in range(width)]
    arr = arr.astype(np.int64)
    if arr.shape != (lanes,):
        raise NetlistError(f"per-lane stimulus has shape {arr.shape}, expected ({lanes},)")
    out = []
    for k in range(width):
        bits = ((arr >> k) & 1).astype(np.uint8)
        out.append(int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little"))
    return out


def _lane_values(bit_ints: list, lanes: int) -> np.ndarray:
    nbytes = (lanes + 7) // 8
    val = np.zeros(lanes, dtype=np.int64)
    for k, b in enumerate(bit_ints):
        if b == 0:
            continue
        raw = np.frombuffer(b.to_bytes(nbytes, "little"), dtype=np.uint8)
        val |= np.unpackbits(raw, bitorder="little")[:lanes].astype(np.int64) << k
    return val


def simulate_netlist(netlist: Netlist, stimulus, cycles: int | None = None, lanes: int = 1) -> list:
    """Two-phase cycle simulation: settle logic, sample outputs, then clock the DFFs.

    With ``lanes == 1`` outputs are plain integers.
    """
    res = CompiledNetlist(netlist).run(stimulus, cycles, lanes)
    if lanes == 1:
        return [{p: int(v[0]) for p, v in r.items()} for r in res]
    return res


# -- Verilog --------------------------------------------------------------------------------------

CELL_LIBRARY = """\
module SYN_MUX2 (input a, input b, input s, output y);
  wire sn, t0, t1;
  not g0 (sn, s);
  and g1 (t0, a, sn);
  and g2 (t1, b, s);
  or g3 (y, t0, t1);
endmodule

module SYN_HA (input a, input b, output s, output co);
  xor g0 (s, a, b);
  and g1 (co, a, b);
endmodule

module SYN_FA (input a, input b, input ci, output s, output co);
  wire t, g, p;
  xor g0 (t, a, b);
  xor g1 (s, t, ci);
  and g2 (g, a, b);
  and g3 (p, t, ci);
  or g4 (co, g, p);
endmodule

module SYN_DFF (input clk, input d, output reg q);
  initial q = 1'b0;
  always @(posedge clk) q <= d;
endmodule
"""

_PORT_BIT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\[(\d+)\]$")


def _local(net: str, scope: str) -> str:
    if net in CONSTS:
        return net
    if scope and net.startswith(scope + SEP):
        return net[len(scope) + len(SEP):]
    return net


def _port_ident(net: str) -> str:
    m = _PORT_BIT.match(net)
    if m:
        return f"p_{m.group(1)}_{m.group(2)}"
    return "p_" + net


def _gate_line(g: Gate, ref) -> str:
    attrs = "".join(f'(* {k} = "{v}" *) ' for k, v in g.attrs)
    name = _local(g.name, g.scope)
    if g.kind in VERILOG_BUILTIN:
        pins = ", ".join(ref(n) for n in g.outputs + g.inputs)
        return f"  {attrs}{VERILOG_BUILTIN[g.kind]} {name} ({pins});"
    ins, outs = PRIMITIVES[g.kind]
    conns = [f".{p}({ref(n)})" for p, n in zip(ins, g.inputs)] + [f".{p}({ref(n)})" for p, n in zip(outs, g.outputs)]
    if g.kind == "DFF":
        conns.insert(0, ".clk(clk)")
    return f"  {attrs}{CELL_MODULE[g.kind]} {name} ({', '.join(conns)});"


def emit_verilog(netlist: Netlist, header: str = "") -> str:
    """Structural Verilog-2001: the cell library, one module per scope, then the top."""
    out = []
    if header:
        out.extend(f"// {line}" if line else "//" for line in header.splitlines())
        out.append("")
    out.append(CELL_LIBRARY)
    netlist.validate()
    scopes = sorted({g.scope for g in netlist.gates if g.scope})
    inst_lines = []
    exported = set()
    for sc in scopes:
        gates = [g for g in netlist.gates if g.scope == sc]
        driven = {n for g in gates for n in g.outputs}
        used_in = []
        for g in gates:
            for n in g.inputs:
                if n not in driven and n not in CONSTS and n not in used_in:
                    used_in.append(n)
        used_out = []
        outside_users = {n for g in netlist.gates if g.scope != sc for n in g.inputs}
        outside_users |= {n for _, nets in netlist.outputs for n in nets}
        for g in gates:
            for n in g.outputs:
                if n in outside_users:
                    used_out.append(n)
        exported.update(used_out)
        has_dff = any(g.kind == "DFF" for g in gates)
        mod = netlist.scope_modules.get(sc, f"{netlist.name}_{sc}")
        ports = (["input clk"] if has_dff else []) + [f"input {_port_ident(n)}" for n in used_in] + \
                [f"output {_port_ident(n)}" for n in used_out]
        boundary = {n: _port_ident(n) for n in used_in + used_out}
        out.append(f"module {mod} (")
        out.append(",\n".join(f"  {p}" for p in ports))
        out.append(");")
        internal = [n for g in gates for n in g.outputs if n not in boundary]
        for n in internal:
            out.append(f"  wire {_local(n, sc)};")

        def ref(n, boundary=boundary, sc=sc):
            return boundary.get(n) or _local(n, sc)

        for g in gates:
            out.append(_gate_line(g, ref))
        out.append("endmodule")
        out.append("")
        conns = ([".clk(clk)"] if has_dff else []) + [f".{boundary[n]}({n})" for n in used_in + used_out]
        inst_lines.append(f"  {mod} {sc} ({', '.join(conns)});")

    out.append(f"module {netlist.name} (")
    decl = [f"  input {netlist.clock}"]
    decl += [f"  input [{w - 1}:0] {p}" for p, w in netlist.inputs]
    decl += [f"  output [{len(nets) - 1}:0] {p}" for p, nets in netlist.outputs]
    out.append(",\n".join(decl))
    out.append(");")
    top_wires = [n for g in netlist.gates for n in g.outputs if not g.scope or n in exported]
    for n in top_wires:
        out.append(f"  wire {n};")
    for g in netlist.gates:
        if not g.scope:
            out.append(_gate_line(g, lambda n: n))
    out.extend(inst_lines)
    for p, nets in netlist.outputs:
        for k, n in enumerate(nets):
            out.append(f"  assign {p}[{k}] = {n};")
    out.append("endmodule")
    return "\n".join(out) + "\n"


_MODULE_RE = re.compile(r"^\s*module\s+(\w+)\s*\((.*?)\);(.*?)^\s*endmodule", re.S | re.M)
_ATTR_RE = re.compile(r'\(\*\s*(\w+)\s*=\s*"([^"]*)"\s*\*\)')
_INST_RE = re.compile(r"^\s*((?:\(\*.*?\*\)\s*)*)(\w+)\s+(\w+)\s*\((.*)\);\s*$")
_CONN_RE = re.compile(r"\.(\w+)\(([^()]*)\)")
_ASSIGN_RE = re.compile(r"^\s*assign\s+(\w+)\[(\d+)\]\s*=\s*(\S+)\s*;\s*$")
_DECL_RE = re.compile(r"^\s*(input|output)\s*(?:\[(\d+):0\]\s*)?(\w+)\s*$")


def _strip_comments(text: str) -> str:
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    return re.sub(r"//[^\n]*", "", text)


def parse_verilog(text: str, top: str | None = None) -> Netlist:
    """Load the structural subset written by :func:`emit_verilog` into a flat netlist."""
    text = _strip_comments(text)
    modules = {}
    for m in _MODULE_RE.finditer(text):
        modules[m.group(1)] = (m.group(2), m.group(3))
    if not modules:
        raise ParseError("no module found")
    cell_of = {v: k for k, v in CELL_MODULE.items()}
    builtin_of = {v: k for k, v in VERILOG_BUILTIN.items()}
    user = [n for n in modules if n not in cell_of]
    if top is None:
        instantiated = set()
        for name in user:
            for line in modules[name][1].splitlines():
                im = _INST_RE.match(line)
                if im:
                    instantiated.add(im.group(2))
        tops = [n for n in user if n not in instantiated]
        if len(tops) != 1:
            raise ParseError(f"cannot identify the top module among {tops}")
        top = tops[0]
    if top not in modules:
        raise ParseError(f"module {top} not found")

    ports_txt, body = modules[top]
    nl = Netlist(top)
    for decl in ports_txt.split(","):
        dm = _DECL_RE.match(decl.strip())
        if not dm:
            raise ParseError(f"bad port declaration {decl.strip()!r}")
        direction, msb, name = dm.groups()
        if direction == "input":
            if msb is None:
                nl.clock = name
            else:
                nl.inputs.append((name, int(msb) + 1))
        else:
            nl.outputs.append((name, [None] * (int(msb) + 1)))

    out_index = {p: i for i, (p, _) in enumerate(nl.outputs)}

    def instance(kind_mod, name, conn_txt, attrs, scope, mapnet):
        if kind_mod in builtin_of:
            kind = builtin_of[kind_mod]
            pins = [p.strip() for p in conn_txt.split(",")]
            n_out = len(PRIMITIVES[kind][1])
            outs, ins = pins[:n_out], pins[n_out:]
            nl.gates.append(Gate(name, kind, tuple(mapnet(n) for n in ins), tuple(mapnet(n) for n in outs),
                                 scope, attrs))
            return
        if kind_mod in cell_of:
            kind = cell_of[kind_mod]
            conns = dict(_CONN_RE.findall(conn_txt))
            ip, op = PRIMITIVES[kind]
            try:
                ins = tuple(mapnet(conns[p].strip()) for p in ip)
                outs = tuple(mapnet(conns[p].strip()) for p in op)
            except KeyError as e:
                raise ParseError(f"instance {name} misses pin {e}") from None
            nl.gates.append(Gate(name, kind, ins, outs, scope, attrs))
            return
        if kind_mod in modules and not scope:
            sub_ports, sub_body = modules[kind_mod]
            conns = {k: v.strip() for k, v in _CONN_RE.findall(conn_txt)}
            nl.scope_modules[name] = kind_mod

            def sub_map(n, conns=conns, name=name):
                if n in CONSTS:
                    return n
                if n in conns:
                    return conns[n]
                return f"{name}{SEP}{n}"

            for line in sub_body.splitlines():
                walk(line, name, sub_map)
            return
        raise ParseError(f"unknown module {kind_mod!r}")

    def walk(line, scope, mapnet):
        s = line.strip()
        if not s or s.startswith("wire ") or s.startswith("input ") or s.startswith("output "):
            return
        am = _ASSIGN_RE.match(s)
        if am:
            if scope:
                raise ParseError("assign inside a sub-module is not supported")
            port, k, net = am.groups()
            if port not in out_index:
                raise ParseError(f"assign to unknown output {port}")
            nl.outputs[out_index[port]][1][int(k)] = mapnet(net)
            return
        im = _INST_RE.match(s)
        if not im:
            raise ParseError(f"cannot parse line {s!r}")
        attr_txt, kind_mod, name, conn_txt = im.groups()
        attrs = tuple(_ATTR_RE.findall(attr_txt or ""))
        full = f"{scope}{SEP}{name}" if scope else name
        instance(kind_mod, full, conn_txt, attrs, scope, mapnet)

    for line in body.splitlines():
        walk(line, "", lambda n: n)
    for p, nets in nl.outputs:
        if any(n is None for n in nets):
            raise ParseError(f"output {p} is not fully assigned")
    nl.outputs = [(p, tuple(nets)) for p, nets in nl.outputs]
    nl.validate()
    return nl


# -- isomorphism ------------------------------------------------------------------------------------


def canonical_form(netlist: Netlist) -> tuple:
    """Name-exact description (gate order and scopes ignored)."""
    gates = tuple(sorted((g.name, g.kind, g.inputs, g.outputs, tuple(sorted(g.attrs))) for g in netlist.gates))
    return (tuple(netlist.inputs), tuple(netlist.outputs), gates)


def netlist_graph(netlist: Netlist):
    """Directed graph: gates, port bits and constants as labelled nodes.

    Parallel connections between two nodes collapse into one edge whose label is
    the sorted tuple of (driver pin, sink pin) pairs.
    """
    import networkx as nx

    g = nx.DiGraph()
    src = {}
    for c in CONSTS:
        g.add_node(c, label=f"const:{c}")
        src[c] = (c, "y")
    for p, w in netlist.inputs:
        for k in range(w):
            node = f"in:{p}[{k}]"
            g.add_node(node, label=f"in:{p}[{k}]")
            src[f"{p}[{k}]"] = (node, "y")
    for gt in netlist.gates:
        g.add_node("g:" + gt.name, label=f"{gt.kind}{sorted(gt.attrs)}")
        for pin, n in zip(PRIMITIVES[gt.kind][1], gt.outputs):
            src[n] = ("g:" + gt.name, pin)
    pins = defaultdict(list)
    for gt in netlist.gates:
        for pin, n in zip(PRIMITIVES[gt.kind][0], gt.inputs):
            s, spin = src[n]
            pins[(s, "g:" + gt.name)].append(f"{spin}>{pin}")
    for p, nets in netlist.outputs:
        for k, n in enumerate(nets):
            node = f"out:{p}[{k}]"
            g.add_node(node, label=f"out:{p}[{k}]")
            s, spin = src[n]
            pins[(s, node)].append(f"{spin}>o")
    for (u, v), labels in pins.items():
        g.add_edge(u, v, label="|".join(sorted(labels)))
    return g


def isomorphic(a: Netlist, b: Netlist) -> bool:
    """Graph isomorphism respecting gate kinds, pins, attributes and port names."""
    if canonical_form(a) == canonical_form(b):
        return True
    if sorted(a.inputs) != sorted(b.inputs) or len(a.gates) != len(b.gates):
        return False
    if sorted(p for p, _ in a.outputs) != sorted(p for p, _ in b.outputs):
        return False
    import networkx as nx
    from networkx.algorithms.isomorphism import GraphMatcher

    ga, gb = netlist_graph(a), netlist_graph(b)
    if nx.weisfeiler_lehman_graph_hash(ga, node_attr="label", edge_attr="label") != \
            nx.weisfeiler_lehman_graph_hash(gb, node_attr="label", edge_attr="label"):
        return False
    gm = GraphMatcher(ga, gb, node_match=lambda x, y: x["label"] == y["label"],
                      edge_match=lambda x, y: x["label"] == y["label"])
    return gm.is_isomorphic()
