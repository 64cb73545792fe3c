"""Gate-level macro construction, HDL emission, testbenches and golden co-simulation.

Cycle protocol of an emitted macro
----------------------------------
* ``cfg`` is a one-hot precision select (bit order = spec precision order) and
  must stay constant while an operation is in flight.
* Weights are written one row address per cycle: ``wwl`` is a one-hot write
  wordline over ``mcr * height`` addresses (address ``m * height + r`` is row
  ``r`` of weight set ``m``) and ``wbl`` carries the column bits.  Column ``c``
  stores bit ``c % wb`` of weight group ``c // wb``.
* An operation starts with ``ld`` high and the activations on ``x_<row>``.
  Integer activations sit in the low bits (two's complement).  FP activations
  use a canonical layout: mantissa left-aligned in the low ``mant_bits``,
  then the raw exponent field, then the sign.
* The activation bits reach the array ``bit_offset`` cycles after ``ld`` (one
  extra cycle when an alignment stage exists).  During bit cycle ``b`` the
  driver raises ``tok[b]``, ``first`` on ``b == 0``, ``last`` on the final bit,
  and ``neg`` on the final bit of signed inputs.  ``sel`` picks the weight set
  and must hold through the bit cycles.  The next ``ld`` may coincide with the
  previous operation's final bit cycle.
* Results appear ``out_delay`` cycles after the ``last`` cycle, flagged by
  ``valid``: ``y<s>_<g>`` is fusion stage ``s`` (stage 0 = per-column S&A
  values, the top weight slice already negated) and ``exp_out`` the shared
  exponent of FP operations.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import functional as fm
from .adder_tree import CONST0 as T0, CONST1 as T1, input_net
from .library import SubcircuitKind, acc_width, ofu_widths
from .netlist import (
    CONST0,
    CONST1,
    CompiledNetlist,
    Netlist,
    NetlistBuilder,
    emit_verilog,
    sign_extend,
    zero_extend,
)
from .spec_model import PrecisionFormat
from .timing import MacroDesign, design_to_dict, stage_name

K = SubcircuitKind
ALIGN_SCOPE = "u_align"


class UnboundBlock(Exception):
    pass


# -- interface -------------------------------------------------------------------------------------


@dataclass(frozen=True)
class Interface:
    height: int
    width: int
    mcr: int
    precisions: tuple
    x_width: int
    n_max: int
    acc_w: int
    ofu_widths: tuple
    exp_bits: int
    mant_bits: int
    bit_offset: int
    out_delay: int

    @property
    def sel_bits(self) -> int:
        return (self.mcr - 1).bit_length()

    @property
    def n_ofu(self) -> int:
        return len(self.ofu_widths) - 1

    def fmt(self, name: str) -> PrecisionFormat:
        return next(p for p in self.precisions if p.name == name)

    def stage_for(self, p: PrecisionFormat) -> int:
        return (fm.weight_format(p).total_bits - 1).bit_length()

    def result_ports(self, p: PrecisionFormat) -> list:
        s = self.stage_for(p)
        return [f"y{s}_{g}" for g in range(self.width >> s)]

    def encode_x(self, p: PrecisionFormat, code: int) -> int:
        if not p.is_float:
            return int(code) & ((1 << p.total_bits) - 1)
        s, e, m = fm.fp_fields(code, p)
        return (s << (self.exp_bits + self.mant_bits)) | (e << self.mant_bits) | (m << (self.mant_bits - p.mantissa_bits))

    def to_dict(self) -> dict:
        return {
            "height": self.height, "width": self.width, "mcr": self.mcr,
            "precisions": [p.name for p in self.precisions], "x_width": self.x_width, "n_max": self.n_max,
            "acc_width": self.acc_w, "ofu_widths": list(self.ofu_widths), "exp_bits": self.exp_bits,
            "mant_bits": self.mant_bits, "bit_offset": self.bit_offset, "out_delay": self.out_delay,
        }


def interface(design: MacroDesign) -> Interface:
    spec = design.spec
    P = spec.precisions
    fps = [p for p in P if p.is_float]
    emax = max((p.exponent_bits for p in fps), default=0)
    mmax = max((p.mantissa_bits for p in fps), default=0)
    int_w = max((p.total_bits for p in P if not p.is_float), default=0)
    x_w = max(int_w, 1 + emax + mmax if fps else 0)
    n_max = spec.max_input_bits
    aw = acc_width(spec.height, n_max)
    n_ofu = design.n_ofu
    L = len(design.stages)
    i_wl = design.stage_index("wl")
    return Interface(spec.height, spec.width, spec.mcr, tuple(P), x_w, n_max, aw,
                     tuple(ofu_widths(aw, n_ofu)), emax, mmax, 2 if design.has_align else 1, L - i_wl)


# -- netlist construction ----------------------------------------------------------------------------


REQUIRED = (K.WlDriver, K.BlDriver, K.MemoryCell, K.MultiplierMux, K.AdderTree, K.ShiftAdd)


def _check_bound(design: MacroDesign) -> None:
    for k in REQUIRED:
        if design.binding(k) is None:
            raise UnboundBlock(f"no {k.label} bound")
    if design.spec.float_formats and design.binding(K.FpIntAlign) is None:
        raise UnboundBlock("FP precisions need an fp_int_align binding")
    if design.n_ofu and design.binding(K.OutputFusion) is None:
        raise UnboundBlock("multi-bit weights need an output_fusion binding")


def _emit_cells(b: NetlistBuilder, cells, nm: dict) -> None:
    """Instantiate adder-tree cells; ``nm`` maps tree nets to netlist nets (updated in place)."""
    nm.setdefault(T0, CONST0)
    nm.setdefault(T1, CONST1)
    for c in cells:
        v = {p: nm[n] for p, n in c.inputs}
        if c.kind == "FA":
            s, co = b.FA(v["a"], v["b"], v["cin"])
            res = {"sum": s, "carry": co}
        elif c.kind == "HA":
            s, co = b.HA(v["a"], v["b"])
            res = {"sum": s, "carry": co}
        elif c.kind == "C42":
            s1, cout = b.FA(v["x1"], v["x2"], v["x3"])
            s, carry = b.FA(s1, v["x4"], v["cin"])
            res = {"sum": s, "carry": carry, "cout": cout}
        elif c.kind == "NOT":
            res = {"y": b.NOT(v["a"])}
        else:
            raise ValueError(f"unknown tree cell {c.kind}")
        for p, n in c.outputs:
            nm[n] = res[p]


def _align(b: NetlistBuilder, xs, fps, cfg_bit, emax: int, mmax: int):
    """FP fields -> (aligned signed values of mmax + 6 bits, shared exponent field)."""
    A = mmax + 1 + 4
    rows = []
    for x in xs:
        m = x[:mmax]
        e = x[mmax:mmax + emax]
        s = x[mmax + emax]
        zero = b.NOT(b.or_reduce(e))
        eff = [b.OR(e[0], zero)] + e[1:]
        rows.append((s, m, b.NOT(zero), eff))

    def vmax(a, c):
        _, ge = b.add(a, [b.NOT(x) for x in c], cin=CONST1)
        return [b.MUX(ck, ak, ge) for ak, ck in zip(a, c)]

    level = [r[3] for r in rows]
    while len(level) > 1:
        nxt = [vmax(p, q) for p, q in zip(level[0::2], level[1::2])]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    E = level[0]
    out = []
    for s, m, hidden, eff in rows:
        d, _ = b.add(E, [b.NOT(x) for x in eff], cin=CONST1)
        v = [CONST0] * 4 + list(m) + [hidden]
        sat = CONST0
        for k, dk in enumerate(d):
            amt = 1 << k
            if amt >= A:
                sat = b.OR(sat, dk)
                continue
            v = [b.MUX(v[j], v[j + amt] if j + amt < A else CONST0, dk) for j in range(A)]
        if sat != CONST0:
            keep = b.NOT(sat)
            v = [b.AND(x, keep) for x in v]
        if len(fps) == 1:
            sh = mmax - fps[0].mantissa_bits
            mag = v[sh:] + [CONST0] * sh
        else:
            mag = [CONST0] * A
            for f in fps:
                sh = mmax - f.mantissa_bits
                part = v[sh:] + [CONST0] * sh
                mag = [b.OR(a, b.AND(cfg_bit(f), x)) for a, x in zip(mag, part)]
        t = [b.XOR(x, s) for x in mag] + [s]
        val, _ = b.add(t, [], cin=s, width=A + 1)
        out.append(val)
    return out, E


def _multiplier(b: NetlistBuilder, topo: str, bit: str, nbit, qs: list, sel: list):
    """Product bit of a WL bit and the selected stored weight bit."""

    def mux_tree(vals):
        level = list(vals)
        for sb in sel:
            level = [b.MUX(x, y, sb) for x, y in zip(level[0::2], level[1::2])]
        return level[0]

    if topo == "oai22_fused":
        if len(qs) == 1:
            return b.NOR(b.NOT(qs[0]), nbit())
        if len(qs) == 2:
            g0 = b.NAND(qs[0], b.NOT(sel[0]))
            g1 = b.NAND(qs[1], sel[0])
            return b.NOR(b.AND(g0, g1), nbit())
    if topo == "tg2t_nor":
        return b.NOR(b.NOT(mux_tree(qs)), nbit())
    return b.AND(bit, mux_tree(qs))


def build_netlist(design: MacroDesign, name: str = "macro") -> Netlist:
    """Gate-level netlist mirroring the design's blocks, bindings and pipeline cuts."""
    _check_bound(design)
    spec = design.spec
    itf = interface(design)
    H, W, mcr = spec.height, spec.width, spec.mcr
    P = spec.precisions
    cuts = design.cuts
    n_max = itf.n_max
    L = len(design.stages)
    st = design.stage_index
    i_wl = st("wl")

    b = NetlistBuilder(name)
    rst = b.input("rst", 1)[0]
    cfg = b.input("cfg", len(P))
    sel = b.input("sel", itf.sel_bits) if itf.sel_bits else []
    ld = b.input("ld", 1)[0]
    first = b.input("first", 1)[0]
    last = b.input("last", 1)[0]
    neg = b.input("neg", 1)[0]
    tok = b.input("tok", n_max)
    xs = [b.input(f"x_{i}", itf.x_width) for i in range(H)]
    wwl = b.input("wwl", H * mcr)
    wbl = b.input("wbl", W)

    def cfg_bit(p):
        return CONST1 if len(P) == 1 else cfg[P.index(p)]

    def after(block, nets):
        return [b.DFF(n) for n in nets] if block in cuts else list(nets)

    # -- input conditioning (alignment stage) --
    fps = [p for p in P if p.is_float]
    E = []
    aligned = None
    if fps:
        b.scope = ALIGN_SCOPE
        b.nl.scope_modules[ALIGN_SCOPE] = f"{name}_align"
        aligned, E = _align(b, xs, fps, cfg_bit, itf.exp_bits, itf.mant_bits)
        b.scope = ""
    fp_any = b.or_reduce([cfg_bit(p) for p in fps]) if fps else CONST0
    loads = []
    for i, x in enumerate(xs):
        acc = [CONST0] * n_max
        for p in P:
            if p.is_float:
                continue
            raw = x[:p.total_bits]
            ext = sign_extend(raw, n_max) if p.signed else zero_extend(raw, n_max)
            g = cfg_bit(p)
            acc = [b.OR(a, b.AND(g, v)) for a, v in zip(acc, ext)]
        if aligned is not None:
            ext = sign_extend(aligned[i], n_max)
            acc = [b.OR(a, b.AND(fp_any, v)) for a, v in zip(acc, ext)]
        loads.append(acc)
    if design.has_align:
        loads = [after("align", l) for l in loads]
        ld_eff = b.DFF(ld)
        E = after("align", E)
    else:
        ld_eff = ld

    # -- input serializers (WL drivers) --
    bits = []
    for i in range(H):
        q = [b.reserve_dff("ser") for _ in range(n_max)]
        for j in range(n_max):
            b.close_dff(q[j], b.MUX(q[j + 1] if j + 1 < n_max else CONST0, loads[i][j], ld_eff))
        bits.append(q[0])
    bits = after("wl", bits)
    nbits = {}

    def nbit_of(i):
        return lambda: nbits.setdefault(i, b.NOT(bits[i]))

    # -- SRAM array (write port: one-hot wordline, column bitlines) --
    cell_attr = (("CUSTOM_CELL", design.topology(K.MemoryCell)),)
    cells = [[[None] * W for _ in range(H)] for _ in range(mcr)]
    for m in range(mcr):
        for r in range(H):
            for c in range(W):
                q = b.reserve_dff("cell", cell_attr)
                b.close_dff(q, b.MUX(q, wbl[c], wwl[m * H + r]))
                cells[m][r][c] = q

    # -- multipliers --
    mtopo = design.topology(K.MultiplierMux)
    prod = [[_multiplier(b, mtopo, bits[r], nbit_of(r), [cells[m][r][c] for m in range(mcr)], sel)
             for c in range(W)] for r in range(H)]
    prod = [after("mult", row) for row in prod]

    # -- adder trees, optional split merge, final RCA --
    tree = design.adder_tree
    h = design.tree_operands
    sums = []
    for c in range(W):
        part_rows = []
        for t in range(design.split):
            nm = {input_net(i, 0): prod[t * h + i][c] for i in range(h)}
            _emit_cells(b, tree.cells, nm)
            rows = [[nm[n] for n in col] for col in tree.rows]
            if "csa" in cuts:
                for col_nets, reg in zip(tree.rows, rows):
                    for n, v in zip(col_nets, reg):
                        nm[n] = b.DFF(v)
                rows = [[nm[n] for n in col] for col in tree.rows]
            part_rows.append((nm, rows))
        if design.split == 1:
            nm, _ = part_rows[0]
            _emit_cells(b, tree.rca_cells, nm)
            out = [nm[n] for n in tree.out_bits]
        else:
            mt = design.merge_tree
            nm2 = {}
            for t, (_, rows) in enumerate(part_rows):
                for j in range(mt.width):
                    col = rows[j] if j < len(rows) else []
                    nm2[input_net(2 * t, j)] = col[0] if len(col) > 0 else CONST0
                    nm2[input_net(2 * t + 1, j)] = col[1] if len(col) > 1 else CONST0
            _emit_cells(b, mt.cells, nm2)
            if "merge" in cuts:
                for col in mt.rows:
                    for n in col:
                        nm2[n] = b.DFF(nm2[n])
            _emit_cells(b, mt.rca_cells, nm2)
            out = [nm2[n] for n in mt.out_bits]
        sums.append(after("rca", out))

    # -- shift-and-add accumulators --
    d_sa = st("shift_add") - i_wl
    f_d = b.delay(first, d_sa)
    n_d = b.delay(neg, d_sa)
    tok_d = [b.delay(t, d_sa) for t in tok]
    nfirst = b.NOT(f_d)
    aw = itf.acc_w
    acc_next = []
    for c in range(W):
        sp = sums[c]
        shifted = []
        for j in range(aw):
            terms = [b.AND(tok_d[k], sp[j - k]) for k in range(n_max) if 0 <= j - k < len(sp)]
            shifted.append(b.or_reduce(terms))
        msb = b.or_reduce([cfg_bit(p) for p in P
                           if fm.weight_format(p).signed and fm.weight_format(p).total_bits > 1
                           and c % fm.weight_format(p).total_bits == fm.weight_format(p).total_bits - 1])
        ne = b.XOR(n_d, msb)
        t = [b.XOR(x, ne) for x in shifted]
        q = [b.reserve_dff("acc") for _ in range(aw)]
        base = [b.AND(x, nfirst) for x in q]
        nxt, _ = b.add(base, t, cin=ne, width=aw)
        for qq, dd in zip(q, nxt):
            b.close_dff(qq, dd)
            b.alias_register(dd, qq)
        acc_next.append(nxt)

    # -- output fusion and output alignment --
    taps = [(st("shift_add"), acc_next)]
    # a cut after the S&A reuses the accumulator register itself (aliased above)
    src = [after("shift_add", v) for v in acc_next]
    for s in range(1, itf.n_ofu + 1):
        ws = itf.ofu_widths[s]
        sh = 1 << (s - 1)
        raw = []
        for g in range(len(src) // 2):
            lo = sign_extend(src[2 * g], ws)
            hi = [CONST0] * sh + sign_extend(src[2 * g + 1], ws - sh)
            v, _ = b.add(lo, hi, width=ws)
            raw.append(v)
        taps.append((st(f"ofu_{s}"), raw))
        src = [after(f"ofu_{s}", v) for v in raw]
    for s, (stage, vals) in enumerate(taps):
        for g, v in enumerate(vals):
            b.output(f"y{s}_{g}", [b.delay(n, L - stage) for n in v])

    D = itf.out_delay
    b.output("valid", [b.AND(b.delay(last, D), b.NOT(rst))])
    if fps:
        hold = []
        for e in E:
            q = b.reserve_dff("exp")
            b.close_dff(q, b.MUX(q, e, ld_eff))
            hold.append(q)
        b.output("exp_out", [b.delay(q, D) for q in hold])
    return b.build()


# -- stimulus programs ---------------------------------------------------------------------------------


class Program:
    """Cycle-by-cycle stimulus plus expected outputs for one macro interface."""

    CONTROL = ("ld", "first", "last", "neg", "tok", "wwl", "rst")

    def __init__(self, itf: Interface, lanes: int = 1):
        self.itf = itf
        self.lanes = lanes
        self.cycles: list = []
        self.expects: list = []  # (cycle, tag, {port: value or lane array})
        self.cursor = 0
        self._at(0)["rst"] = 1
        self.cursor = 1

    def _at(self, c: int) -> dict:
        while len(self.cycles) <= c:
            self.cycles.append({k: 0 for k in self.CONTROL})
        return self.cycles[c]

    def write(self, wbits, cfg: int) -> None:
        """``wbits[lane][m][r][c]`` (or ``[m][r][c]`` for one lane) -> one write cycle per row address."""
        H, mcr = self.itf.height, self.itf.mcr
        wb = np.asarray(wbits, dtype=np.uint8)
        if wb.ndim == 3:
            wb = wb[None]
        for m in range(mcr):
            for r in range(H):
                cyc = self._at(self.cursor)
                cyc["cfg"] = cfg
                cyc["wwl"] = 1 << (m * H + r)
                col = wb[:, m, r, :]
                cyc["wbl"] = col if self.lanes > 1 else int(sum(int(v) << k for k, v in enumerate(col[0])))
                self.cursor += 1

    def op(self, p: PrecisionFormat, cfg: int, sel: int, xcodes, expected: dict, tag=None) -> int:
        """Schedule one operation starting at the cursor; returns the cycle the result is valid."""
        itf = self.itf
        t = self.cursor
        n = p.input_bits
        c0 = self._at(t)
        c0["ld"] = 1
        c0["cfg"] = cfg
        xc = np.asarray(xcodes)
        for i in range(itf.height):
            col = xc[..., i]
            if self.lanes > 1:
                c0[f"x_{i}"] = np.array([itf.encode_x(p, int(v)) for v in col], dtype=np.int64)
            else:
                c0[f"x_{i}"] = itf.encode_x(p, int(col))
        for k in range(n):
            cyc = self._at(t + itf.bit_offset + k)
            cyc["first"] = int(k == 0)
            cyc["last"] = int(k == n - 1)
            cyc["neg"] = int(k == n - 1 and p.signed)
            cyc["tok"] = 1 << k
            if itf.sel_bits:
                cyc["sel"] = sel
        done = t + itf.bit_offset + n - 1 + itf.out_delay
        self._at(done)
        self.expects.append((done, tag, expected))
        self.cursor = t + n
        return done

    def drain(self) -> None:
        if self.expects:
            self.cursor = max(self.cursor, max(c for c, _, _ in self.expects) + 1)
        self._at(self.cursor)
        self.cursor += 1


def _cfg_value(itf: Interface, p: PrecisionFormat) -> int:
    return 1 << itf.precisions.index(p)


def _weight_bits(state: fm.MacroState) -> np.ndarray:
    return state.weights.copy()


@dataclass
class GoldenVector:
    precision: str
    weights: list  # [mcr][height][groups] integers
    sel: int
    activations: list  # codes
    outputs: tuple
    shared_exponent: int | None = None


def _expected_ports(itf: Interface, p: PrecisionFormat, result_outputs, E) -> dict:
    s = itf.stage_for(p)
    w = itf.ofu_widths[s]
    exp = {"valid": 1}
    for g, v in enumerate(result_outputs):
        exp[f"y{s}_{g}"] = int(v) & ((1 << w) - 1)
    if itf.exp_bits and p.is_float:
        exp["exp_out"] = int(E)
    return exp


def golden_vectors(design: MacroDesign, n: int, seed: int = 0) -> list:
    """``n`` golden vectors cycling through the spec precisions."""
    spec = design.spec
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        p = spec.precisions[k % len(spec.precisions)]
        st = fm.MacroState(spec.height, spec.width, spec.mcr)
        ws = []
        for m in range(spec.mcr):
            w = fm.random_weights(st, p, rng)
            st.load_weights(w, p, m)
            ws.append(w.tolist())
        st.sel = int(rng.integers(0, spec.mcr))
        acts = fm.random_activations(spec.height, p, rng)
        r = fm.golden_mac(st, acts, p)
        out.append(GoldenVector(p.name, ws, st.sel, acts, r.outputs, r.shared_exponent))
    return out


def _state_for(itf: Interface, v: GoldenVector) -> fm.MacroState:
    p = itf.fmt(v.precision)
    st = fm.MacroState(itf.height, itf.width, itf.mcr)
    for m, w in enumerate(v.weights):
        st.load_weights(w, p, m)
    st.sel = v.sel
    return st


def vector_program(itf: Interface, vectors) -> Program:
    """Single-lane program: each vector writes its weights, runs once and drains."""
    prog = Program(itf, 1)
    for idx, v in enumerate(vectors):
        p = itf.fmt(v.precision)
        st = _state_for(itf, v)
        prog.write(st.weights, _cfg_value(itf, p))
        prog.op(p, _cfg_value(itf, p), v.sel, v.activations,
                _expected_ports(itf, p, v.outputs, v.shared_exponent), tag=idx)
        prog.drain()
    return prog


# -- co-simulation ---------------------------------------------------------------------------------------


@dataclass
class CosimReport:
    passed: bool
    checked: int
    mismatches: int
    counterexample: dict | None = None
    per_precision: dict = field(default_factory=dict)

    def summary(self) -> str:
        if self.passed:
            return f"PASS: {self.checked} vectors match the golden model"
        return f"FAIL: {self.mismatches} of {self.checked} vectors differ; first: {self.counterexample}"


def lane_program(itf: Interface, p: PrecisionFormat, lanes: int, rng: np.random.Generator):
    """All lanes share the schedule: write every weight set, then one operation per set."""
    prog = Program(itf, lanes)
    states = []
    wbits = np.zeros((lanes, itf.mcr, itf.height, itf.width), dtype=np.uint8)
    for l in range(lanes):
        st = fm.MacroState(itf.height, itf.width, itf.mcr)
        for m in range(itf.mcr):
            st.load_weights(fm.random_weights(st, p, rng), p, m)
        wbits[l] = st.weights
        states.append(st)
    prog.write(wbits, _cfg_value(itf, p))
    for m in range(itf.mcr):
        acts = np.array([fm.random_activations(itf.height, p, rng) for _ in range(lanes)], dtype=np.int64)
        res = []
        for l in range(lanes):
            states[l].sel = m
            res.append(fm.golden_mac(states[l], [int(a) for a in acts[l]], p))
        s = itf.stage_for(p)
        w = itf.ofu_widths[s]
        exp = {"valid": np.ones(lanes, dtype=np.int64)}
        for g in range(itf.width >> s):
            exp[f"y{s}_{g}"] = np.array([r.outputs[g] for r in res], dtype=np.int64) & ((1 << w) - 1)
        if itf.exp_bits and p.is_float:
            exp["exp_out"] = np.array([r.shared_exponent for r in res], dtype=np.int64)
        prog.op(p, _cfg_value(itf, p), m, acts, exp, tag=(p.name, m))
    prog.drain()
    return prog, states


def check_program(compiled: CompiledNetlist, prog: Program):
    """Run a program; returns (mismatching lanes, first counterexample)."""
    lanes = prog.lanes
    want = {c for c, _, _ in prog.expects}
    res = compiled.run(prog.cycles, len(prog.cycles), lanes, sample=sorted(want | set(range(1, len(prog.cycles)))))
    bad = np.zeros(lanes, dtype=bool)
    first = None
    for c, tag, exp in prog.expects:
        got = res[c]
        for port, val in exp.items():
            ok = got[port] == (np.asarray(val) if lanes > 1 else int(val))
            ok = np.broadcast_to(ok, (lanes,))
            if not ok.all() and first is None:
                lane = int(np.nonzero(~ok)[0][0])
                ev = np.asarray(val).reshape(-1)
                first = {"cycle": c, "op": tag, "lane": lane, "port": port,
                         "expected": int(ev[lane if ev.size > 1 else 0]), "got": int(got[port][lane])}
            bad |= ~ok
    valid_cycles = {c for c, _, _ in prog.expects}
    for c in range(1, len(prog.cycles)):
        if c in valid_cycles:
            continue
        v = res[c]["valid"]
        if np.any(v != 0):
            bad |= v != 0
            if first is None:
                first = {"cycle": c, "port": "valid", "expected": 0, "got": 1}
    return int(bad.sum()), first


def cosimulate(design: MacroDesign, netlist: Netlist, vectors: int = 1000, seed: int = 0) -> CosimReport:
    """Netlist versus golden model on ``vectors`` random lanes per precision."""
    itf = interface(design)
    compiled = CompiledNetlist(netlist)
    total = bad_total = 0
    first = None
    per = {}
    for k, p in enumerate(itf.precisions):
        rng = np.random.default_rng([seed, k])
        prog, _ = lane_program(itf, p, vectors, rng)
        bad, ce = check_program(compiled, prog)
        per[p.name] = (vectors - bad, vectors)
        total += vectors
        bad_total += bad
        if ce and first is None:
            first = {"precision": p.name, **ce}
    return CosimReport(bad_total == 0, total, bad_total, first, per)


# -- emission -------------------------------------------------------------------------------------------


def module_name(design_id: str) -> str:
    return f"{design_id}_macro"


def params(design: MacroDesign, design_id: str) -> dict:
    itf = interface(design)
    return {
        "design_id": design_id,
        "module": module_name(design_id),
        "height": design.spec.height,
        "width": design.spec.width,
        "mcr": design.spec.mcr,
        "precisions": [p.name for p in design.spec.precisions],
        "split": design.split,
        "stages": ["+".join(s) for s in design.stages],
        "stage_map": {blk: i for i, s in enumerate(design.stages) for blk in s},
        "stage_names": [stage_name(s) for s in design.stages],
        "latency_cycles": design.latency_cycles,
        "topologies": {bd.kind.label: bd.topology_id for bd in design.bindings},
        "interface": itf.to_dict(),
        "design": design_to_dict(design),
    }


def emit(design: MacroDesign, design_id: str = "macro") -> str:
    """Structural Verilog for the macro; identical designs give identical text."""
    nl = build_netlist(design, module_name(design_id))
    hdr = json.dumps({k: v for k, v in params(design, design_id).items() if k != "design"}, sort_keys=True)
    return emit_verilog(nl, header=f"{module_name(design_id)}: structural netlist\nparams {hdr}")


def _hex(v: int, w: int) -> str:
    return f"{w}'h{int(v) & ((1 << w) - 1):x}"


def emit_testbench(design: MacroDesign, vectors, design_id: str = "macro") -> str:
    """Self-checking bench: one EXPECT line per golden vector."""
    itf = interface(design)
    nl_ports = _port_widths(design, itf)
    prog = vector_program(itf, vectors)
    mod = module_name(design_id)
    ins, outs = nl_ports
    lines = [
        "`timescale 1ns/1ps",
        '`define EXPECT(V, C, SIG, VAL) begin checks = checks + 1; if ((SIG) !== (VAL)) begin '
        'errors = errors + 1; $display("FAIL vector %0d cycle %0d: got %h expected %h", V, C, SIG, VAL); end end',
        f"module {design_id}_tb;",
        "  reg clk = 1'b0;",
    ]
    lines += [f"  reg [{w - 1}:0] {p} = {w}'h0;" for p, w in ins]
    lines += [f"  wire [{w - 1}:0] {p};" for p, w in outs]
    lines += ["  integer checks = 0;", "  integer errors = 0;"]
    conns = [".clk(clk)"] + [f".{p}({p})" for p, _ in ins] + [f".{p}({p})" for p, _ in outs]
    lines.append(f"  {mod} dut ({', '.join(conns)});")
    lines.append("  always #5 clk = ~clk;")
    lines.append("  initial begin")
    widths = dict(ins)
    owidths = dict(outs)
    prev = {}
    exp_at = {}
    for c, tag, exp in prog.expects:
        exp_at.setdefault(c, []).append((tag, exp))
    for c, cyc in enumerate(prog.cycles):
        lines.append(f"    // cycle {c}")
        for p, _ in ins:
            v = int(cyc.get(p, prev.get(p, 0)))
            if prev.get(p, 0 if c else None) != v:
                lines.append(f"    {p} = {_hex(v, widths[p])};")
            prev[p] = v
        lines.append("    #1;")
        for tag, exp in exp_at.get(c, []):
            ports = sorted(exp)
            sig = "{" + ", ".join(reversed(ports)) + "}"
            total = sum(owidths[p] for p in ports)
            val = 0
            off = 0
            for p in ports:
                val |= (int(exp[p]) & ((1 << owidths[p]) - 1)) << off
                off += owidths[p]
            lines.append(f"    `EXPECT({tag}, {c}, {sig}, {_hex(val, total)})")
        lines.append("    @(negedge clk);")
    lines.append('    if (errors == 0) $display("PASS %0d checks", checks);')
    lines.append('    else $display("FAIL %0d of %0d checks", errors, checks);')
    lines.append("    $finish;")
    lines.append("  end")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _port_widths(design: MacroDesign, itf: Interface):
    spec = design.spec
    ins = [("rst", 1), ("cfg", len(spec.precisions))]
    if itf.sel_bits:
        ins.append(("sel", itf.sel_bits))
    ins += [("ld", 1), ("first", 1), ("last", 1), ("neg", 1), ("tok", itf.n_max)]
    ins += [(f"x_{i}", itf.x_width) for i in range(itf.height)]
    ins += [("wwl", itf.height * itf.mcr), ("wbl", itf.width)]
    outs = []
    for s, w in enumerate(itf.ofu_widths):
        outs += [(f"y{s}_{g}", w) for g in range(itf.width >> s)]
    outs.append(("valid", 1))
    if itf.exp_bits:
        outs.append(("exp_out", itf.exp_bits))
    return ins, outs


@dataclass
class BenchResult:
    checks: int
    failures: int
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


_CYCLE = re.compile(r"^\s*//\s*cycle\s+(\d+)\s*$")
_SET = re.compile(r"^\s*(\w+)\s*=\s*(\d+)'h([0-9a-fA-F]+)\s*;\s*$")
_EXPECT = re.compile(r"^\s*`EXPECT\((\d+),\s*(\d+),\s*\{([^}]*)\},\s*(\d+)'h([0-9a-fA-F]+)\)\s*$")


def run_bench(netlist: Netlist, bench_text: str) -> BenchResult:
    """Interpret an emitted bench against a netlist with the internal simulator."""
    cycles: list = []
    expects = []
    cur = None
    for line in bench_text.splitlines():
        m = _CYCLE.match(line)
        if m:
            cur = int(m.group(1))
            while len(cycles) <= cur:
                cycles.append({})
            continue
        if cur is None:
            continue
        m = _SET.match(line)
        if m:
            cycles[cur][m.group(1)] = int(m.group(3), 16)
            continue
        m = _EXPECT.match(line)
        if m:
            ports = [p.strip() for p in m.group(3).split(",")][::-1]
            expects.append((int(m.group(1)), int(m.group(2)), ports, int(m.group(5), 16)))
    res = CompiledNetlist(netlist).run(cycles, len(cycles), 1)
    widths = {p: len(n) for p, n in netlist.outputs}
    failures = 0
    msgs = []
    for vec, c, ports, val in expects:
        got = 0
        off = 0
        for p in ports:
            got |= int(res[c][p][0]) << off
            off += widths[p]
        if got != val:
            failures += 1
            msgs.append(f"FAIL vector {vec} cycle {c}: got {got:x} expected {val:x}")
    msgs.append(f"PASS {len(expects)} checks" if failures == 0 else f"FAIL {failures} of {len(expects)} checks")
    return BenchResult(len(expects), failures, msgs)


def write_artifacts(design: MacroDesign, out_dir, design_id: str, vectors=None, n_vectors: int = 10,
                    seed: int = 0) -> dict:
    """Write ``<id>_macro.v``, ``<id>_tb.v`` and ``<id>_params.json``; returns the paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if vectors is None:
        vectors = golden_vectors(design, n_vectors, seed)
    paths = {
        "macro": out / f"{design_id}_macro.v",
        "testbench": out / f"{design_id}_tb.v",
        "params": out / f"{design_id}_params.json",
    }
    paths["macro"].write_text(emit(design, design_id), encoding="utf-8")
    paths["testbench"].write_text(emit_testbench(design, vectors, design_id), encoding="utf-8")
    paths["params"].write_text(json.dumps(params(design, design_id), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
