"""Mixed 4-2 compressor / full-adder carry-save adder trees.

Trees reduce ``H`` operands of ``w`` bits column by column (Dadda-style
height targets) down to two rows, which a ripple-carry segment adds.  Compressor
levels halve the height target, full-adder levels follow the Dadda sequence.
A tree is described by a policy ``(p, forced)``: the first ``p`` levels run in
compressor mode, and in level ``p - 1`` the columns in ``forced`` use full
adders instead.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

CONST0 = "1'b0"
CONST1 = "1'b1"

IN_PORTS = {
    "FA": ("a", "b", "cin"),
    "HA": ("a", "b"),
    "C42": ("x1", "x2", "x3", "x4", "cin"),
    "NOT": ("a",),
}
OUT_PORTS = {"FA": ("sum", "carry"), "HA": ("sum", "carry"), "C42": ("sum", "carry", "cout"), "NOT": ("y",)}
OUT_WEIGHT = {"sum": 0, "carry": 1, "cout": 1, "y": 0}
ALL_C = 1 << 20  # policy p meaning "compressor mode on every level"


class BudgetInfeasible(Exception):
    def __init__(self, budget_ps: float, achievable_ps: float):
        super().__init__(f"budget {budget_ps:.1f} ps infeasible; fastest tree in the family reaches {achievable_ps:.1f} ps")
        self.budget_ps = budget_ps
        self.achievable_ps = achievable_ps


@dataclass(frozen=True)
class Cell:
    idx: int
    kind: str
    level: int
    weight: int
    inputs: tuple  # ((port, net), ...)
    outputs: tuple  # ((port, net), ...)

    def input_map(self) -> dict:
        return dict(self.inputs)

    def output_net(self, port: str) -> str:
        return dict(self.outputs)[port]


@dataclass(frozen=True)
class CsaTree:
    operands: int
    width: int
    signed: bool
    topology: str
    cells: tuple
    rows: tuple  # per weight: tuple of <=2 nets entering the RCA
    rca_cells: tuple
    out_bits: tuple  # per weight: net of the final sum
    out_width: int
    policy: tuple = (ALL_C, frozenset())
    delay_key: tuple = field(default=(), compare=False)

    @property
    def sum_vector(self) -> tuple:
        return tuple(r[0] if len(r) > 0 else None for r in self.rows)

    @property
    def carry_vector(self) -> tuple:
        return tuple(r[1] if len(r) > 1 else None for r in self.rows)

    @property
    def port_map(self) -> dict:
        return {c.idx: c.input_map() for c in self.cells}

    @property
    def levels(self) -> int:
        return 1 + max((c.level for c in self.cells), default=-1)

    def count(self, kind: str) -> int:
        return sum(1 for c in self.cells if c.kind == kind)

    @property
    def compressors(self) -> int:
        return self.count("C42")

    def input_nets(self) -> list:
        return [[input_net(i, j) for j in range(self.width)] for i in range(self.operands)]

    def all_cells(self) -> tuple:
        return self.cells + self.rca_cells

    def energy(self, cells: dict) -> float:
        return sum(cells[c.kind].energy_fj for c in self.all_cells())

    def area(self, cells: dict) -> float:
        return sum(cells[c.kind].area_um2 for c in self.all_cells())

    def dump(self) -> str:
        """One cell per line: ``kind level weight inputs -> outputs``."""
        lines = [f"# csa_tree {self.topology} H={self.operands} w={self.width} signed={int(self.signed)} out={self.out_width}"]
        for c in self.all_cells():
            lvl = "rca" if c.level < 0 else str(c.level)
            ins = ",".join(f"{p}={n}" for p, n in c.inputs)
            outs = ",".join(f"{p}={n}" for p, n in c.outputs)
            lines.append(f"{c.kind} {lvl} {c.weight} {ins} -> {outs}")
        lines.append("out " + ",".join(self.out_bits))
        return "\n".join(lines) + "\n"


def input_net(i: int, j: int) -> str:
    return f"x{i}_{j}"


def rca_delay(out_width: int, cells: dict) -> float:
    """Lumped ripple model: one full-adder carry delay per output bit."""
    return out_width * cells["FA"].delay("a", "carry")


def out_width_for(operands: int, width: int, signed: bool) -> int:
    if signed:
        return width + (operands - 1).bit_length()
    return (operands * ((1 << width) - 1)).bit_length()


# -- reduction engine ----------------------------------------------------------


def _dadda_target(h: int) -> int:
    d = 2
    while (d * 3) // 2 < h:
        d = (d * 3) // 2
    return d


def _pow2_target(h: int) -> int:
    d = 2
    while d * 2 < h:
        d *= 2
    return d


class _Builder:
    def __init__(self, cells: dict):
        self.cells_model = cells
        self.cells: list[Cell] = []
        self.arrival: dict[str, float] = {}

    def arr(self, net: str) -> float:
        return self.arrival.get(net, 0.0)

    def add(self, kind: str, level: int, weight: int, ins: list) -> dict:
        idx = len(self.cells)
        ports = IN_PORTS[kind]
        inputs = tuple(zip(ports, ins))
        outputs = tuple((p, f"n{idx}_{p}") for p in OUT_PORTS[kind])
        model = self.cells_model[kind]
        for p, net in outputs:
            t = 0.0
            for ip, inet in inputs:
                d = model.delay(ip, p)
                if d is not None:
                    t = max(t, self.arr(inet) + d)
            self.arrival[net] = t
        self.cells.append(Cell(idx, kind, level, weight, inputs, outputs))
        return dict(outputs)


def _reduce(columns: list, b: _Builder, policy, start_level: int = 0) -> tuple:
    """Reduce weighted bit columns to height <= 2; returns (columns, next level)."""
    p, forced = policy
    nw = len(columns)
    level = start_level
    while max((len(c) for c in columns), default=0) > 2:
        rel = level - start_level
        c_mode = rel < p
        h = max(len(c) for c in columns)
        target = _pow2_target(h) if c_mode else _dadda_target(h)
        nxt = [[] for _ in range(nw)]
        couts_in: list = []
        carries_in = 0
        placed = 0
        for k in range(nw):
            col_forced = c_mode and rel == p - 1 and k in forced
            bits = sorted(columns[k], key=lambda n: (b.arr(n), n))
            cins = sorted(couts_in, key=lambda n: (b.arr(n), n))
            couts_out, carries_out = [], []
            proj = len(bits) + len(cins) + carries_in
            while proj > target:
                excess = proj - target
                avail = len(bits) + len(cins)
                if c_mode and not col_forced and excess >= 3 and len(bits) >= 3 and avail >= 5:
                    xs = [bits.pop(0) for _ in range(3)]
                    rest = []
                    for _ in range(2):
                        rest.append(cins.pop(0) if cins else bits.pop(0))
                    o = b.add("C42", level, k, xs + rest)
                    nxt[k].append(o["sum"])
                    carries_out.append(o["carry"])
                    couts_out.append(o["cout"])
                    proj -= 4
                elif excess >= 2 and avail >= 3:
                    ins = []
                    for _ in range(3):
                        ins.append(bits.pop(0) if bits else cins.pop(0))
                    o = b.add("FA", level, k, ins)
                    nxt[k].append(o["sum"])
                    carries_out.append(o["carry"])
                    proj -= 2
                elif avail >= 2:
                    ins = []
                    for _ in range(2):
                        ins.append(bits.pop(0) if bits else cins.pop(0))
                    o = b.add("HA", level, k, ins)
                    nxt[k].append(o["sum"])
                    carries_out.append(o["carry"])
                    proj -= 1
                else:
                    break
            placed += len(carries_out)
            nxt[k].extend(bits)
            nxt[k].extend(cins)
            if k + 1 < nw:
                nxt[k + 1].extend(carries_out)
            couts_in = couts_out if k + 1 < nw else []
            carries_in = len(carries_out) if k + 1 < nw else 0
        if placed == 0:
            raise RuntimeError("column reduction made no progress")
        columns = nxt
        level += 1
    return columns, level


def _rca(rows: list, b: _Builder) -> tuple:
    """Ripple-carry segment over <=2 bits per column; returns (cells, out nets)."""
    start = len(b.cells)
    outs = []
    carry = None
    for k, col in enumerate(rows):
        ins = list(col) + ([carry] if carry is not None else [])
        if len(ins) == 0:
            outs.append(CONST0)
            carry = None
        elif len(ins) == 1:
            outs.append(ins[0])
            carry = None
        elif len(ins) == 2:
            o = b.add("HA", -1, k, ins)
            outs.append(o["sum"])
            carry = o["carry"]
        else:
            o = b.add("FA", -1, k, ins)
            outs.append(o["sum"])
            carry = o["carry"]
    rca_cells = b.cells[start:]
    del b.cells[start:]
    return tuple(rca_cells), tuple(outs)


def _initial_columns(H: int, w: int, signed: bool, out_w: int, b: _Builder) -> list:
    cols = [[] for _ in range(out_w)]
    for i in range(H):
        for j in range(w):
            net = input_net(i, j)
            if signed and j == w - 1 and w > 1:
                net = b.add("NOT", 0, j, [net])["y"]
            cols[j].append(net)
    if signed and w > 1:
        const = (-H * (1 << (w - 1))) % (1 << out_w)
        for k in range(out_w):
            if const >> k & 1:
                cols[k].append(CONST1)
    return cols


def _cells_key(cells: dict) -> tuple:
    return tuple(
        (n, c.energy_fj, c.area_um2, tuple(sorted((i, tuple(sorted(o.items()))) for i, o in c.port_delays.items())))
        for n, c in sorted(cells.items())
        if n in ("FA", "HA", "C42", "NOT")
    )


class _CellsView(dict):
    """Hashable view of a cell-model dict, used as a cache key."""

    def __hash__(self):
        return hash(_cells_key(self))

    def __eq__(self, other):
        return _cells_key(self) == _cells_key(other)


@functools.lru_cache(maxsize=4096)
def _build_policy(H: int, w: int, signed: bool, policy: tuple, cells: _CellsView, out_w: int | None = None) -> CsaTree:
    out_w = out_w or out_width_for(H, w, signed)
    b = _Builder(cells)
    cols = _initial_columns(H, w, signed, out_w, b)
    cols, _ = _reduce(cols, b, policy, start_level=1 if any(c.kind == "NOT" for c in b.cells) else 0)
    red_cells = tuple(b.cells)
    rows = tuple(tuple(sorted(c, key=lambda n: (b.arr(n), n))) for c in cols)
    rca_cells, outs = _rca([list(r) for r in rows], b)
    topo = "cmp42_csa" if policy[0] >= ALL_C and not policy[1] else "mixed_csa"
    return CsaTree(H, w, signed, topo, red_cells, rows, rca_cells, outs, out_w, policy)


def build_policy_tree(H: int, w: int, cells: dict, policy=(ALL_C, frozenset()), signed: bool = False,
                      out_width: int | None = None) -> CsaTree:
    """Tree for an explicit policy; ``out_width`` truncates the result (sums known to fit)."""
    return _build_policy(H, w, signed, (policy[0], frozenset(policy[1])), _CellsView(cells), out_width)


def compressor_tree(H: int, w: int, cells: dict, signed: bool = False) -> CsaTree:
    """The maximal-compressor member of the family (no substitutions)."""
    return build_policy_tree(H, w, cells, (ALL_C, frozenset()), signed)


def fa_tree(H: int, w: int, cells: dict, signed: bool = False) -> CsaTree:
    return build_policy_tree(H, w, cells, (0, frozenset()), signed)


def _next_policy(tree: CsaTree, cells: dict):
    """Next substitution step of the greedy policy, or None once all-FA."""
    p, forced = tree.policy
    levels = tree.levels
    q = min(p, levels)
    first = 1 if any(c.kind == "NOT" for c in tree.cells) else 0
    while q > 0:
        lvl = first + q - 1
        cand = sorted({c.weight for c in tree.cells if c.kind == "C42" and c.level == lvl} - set(forced if q == p else ()))
        if cand:
            _, path = critical_path(tree, cells)
            on_path = sorted({c.weight for c in path if isinstance(c, Cell) and c.kind == "C42" and c.level == lvl})
            col = on_path[0] if on_path else cand[0]
            base = forced if q == p else frozenset()
            return (q, frozenset(base) | {col})
        q -= 1
        forced = frozenset()
        p = q + 1
    return None


def _raw_sequence(H: int, w: int, cells: dict, signed: bool):
    tree = compressor_tree(H, w, cells, signed)
    yield tree
    while True:
        pol = _next_policy(tree, cells)
        if pol is None:
            if tree.compressors:
                yield fa_tree(H, w, cells, signed)
            return
        tree = build_policy_tree(H, w, cells, pol, signed)
        yield tree


@functools.lru_cache(maxsize=512)
def _sequence(H: int, w: int, signed: bool, cells: _CellsView) -> tuple:
    raw = list(_raw_sequence(H, w, cells, signed))
    kept = [raw[0]]
    for t in raw[1:-1]:
        last = kept[-1]
        if (t.compressors <= last.compressors and t.energy(cells) >= last.energy(cells)
                and t.area(cells) >= last.area(cells)):
            kept.append(t)
    if len(raw) > 1:
        kept.append(raw[-1])
    return tuple(kept)


def greedy_sequence(H: int, w: int, cells: dict, signed: bool = False) -> tuple:
    """Trees visited by the substitution policy, from all-compressor to all-FA.

    Steps that would make the sequence cheaper again (fewer cells after a
    substitution) are skipped, so a looser budget never costs more energy or area.
    """
    return _sequence(H, w, signed, _CellsView(cells))


def build_csa_tree(H: int, w: int, timing_budget_ps: float, cells: dict, signed: bool = False) -> CsaTree:
    """Cheapest mixed tree meeting ``timing_budget_ps`` under the substitution policy.

    Starts from the all-compressor tree and swaps compressors on the critical
    path for full adders (deepest compressor level first, lowest column first)
    until the budget holds.  Raises :class:`BudgetInfeasible` when even the
    all-FA tree misses the budget.
    """
    if H < 2:
        raise ValueError("need at least two operands")
    if w < 1:
        raise ValueError("operand width must be >= 1")
    if not timing_budget_ps > 0:
        raise ValueError("timing budget must be positive")
    best = float("inf")
    for tree in greedy_sequence(H, w, cells, signed):
        d, _ = critical_path(tree, cells)
        best = min(best, d)
        if d <= timing_budget_ps:
            return tree
    raise BudgetInfeasible(timing_budget_ps, best)


def build_rca_tree(H: int, w: int, cells: dict, signed: bool = False) -> CsaTree:
    """Baseline: pairwise ripple-carry adders down to two operands, then the RCA segment."""
    out_w = out_width_for(H, w, signed)
    b = _Builder(cells)
    ops = [[input_net(i, j) for j in range(w)] for i in range(H)]
    level = 0
    while len(ops) > 2:
        nxt = []
        for a_op, b_op in zip(ops[0::2], ops[1::2]):
            n = max(len(a_op), len(b_op))
            if signed:
                a_ext = a_op + [a_op[-1]] * (n + 1 - len(a_op))
                b_ext = b_op + [b_op[-1]] * (n + 1 - len(b_op))
            else:
                a_ext = a_op + [None] * (n + 1 - len(a_op))
                b_ext = b_op + [None] * (n + 1 - len(b_op))
            res, carry = [], None
            width = n + 1 if signed else n
            for k in range(width):
                ins = [x for x in (a_ext[k], b_ext[k], carry) if x is not None]
                if len(ins) == 3:
                    o = b.add("FA", level, k, ins)
                elif len(ins) == 2:
                    o = b.add("HA", level, k, ins)
                else:
                    res.append(ins[0] if ins else CONST0)
                    carry = None
                    continue
                res.append(o["sum"])
                carry = o["carry"]
            if not signed:
                res.append(carry if carry is not None else CONST0)
            nxt.append(res[:out_w])
        if len(ops) % 2:
            nxt.append(ops[-1])
        ops = nxt
        level += 1
    cols = [[] for _ in range(out_w)]
    for op in ops:
        for k in range(out_w):
            if k < len(op):
                net = op[k]
            elif signed:
                net = op[-1]
            else:
                continue
            if net != CONST0:
                cols[k].append(net)
    rows = tuple(tuple(sorted(c, key=lambda n: (b.arr(n), n))) for c in cols)
    red = tuple(b.cells)
    rca_cells, outs = _rca([list(r) for r in rows], b)
    return CsaTree(H, w, signed, "signed_rca", red, rows, rca_cells, outs, out_w, (0, frozenset()))


def tree_for_topology(topology: str, H: int, w: int, cells: dict, timing_bin_ps: float | None = None,
                      signed: bool = False) -> CsaTree:
    if topology == "signed_rca":
        return build_rca_tree(H, w, cells, signed)
    if topology == "cmp42_csa":
        return compressor_tree(H, w, cells, signed)
    if topology == "mixed_csa":
        return build_csa_tree(H, w, timing_bin_ps if timing_bin_ps is not None else float("inf"), cells, signed)
    raise ValueError(f"unknown adder topology {topology!r}")


# -- timing ---------------------------------------------------------------------


def arrivals(tree: CsaTree, cells: dict, input_arrival=None) -> dict:
    """Arrival time of every net (reduction cells only; the RCA is lumped)."""
    return _arrivals(tree, cells, input_arrival)[0]


def _arrivals(tree: CsaTree, cells: dict, input_arrival=None):
    arr: dict = {}
    if input_arrival is not None:
        if isinstance(input_arrival, dict):
            arr.update(input_arrival)
        else:
            for row in tree.input_nets():
                for n in row:
                    arr[n] = float(input_arrival)
    pred: dict = {}
    for c in tree.cells:
        model = cells[c.kind]
        for p, net in c.outputs:
            best, who = 0.0, None
            for ip, inet in c.inputs:
                d = model.delay(ip, p)
                if d is None:
                    continue
                t = arr.get(inet, 0.0) + d
                if t > best or who is None:
                    best, who = t, (ip, inet)
            arr[net] = best
            pred[net] = (c, who)
    return arr, pred


def csa_delay(tree: CsaTree, cells: dict, input_arrival=None) -> float:
    arr = arrivals(tree, cells, input_arrival)
    return max((arr.get(n, 0.0) for r in tree.rows for n in r), default=0.0)


def critical_path(tree: CsaTree, cells: dict, input_arrival=None):
    """Longest port-weighted path through the reduction cells plus the RCA segment.

    Returns ``(delay_ps, path)`` where ``path`` lists the cells along the
    witness path followed by the string ``"RCA"``.
    """
    arr, pred = _arrivals(tree, cells, input_arrival)
    end, t_end = None, -1.0
    for r in tree.rows:
        for n in r:
            t = arr.get(n, 0.0)
            if t > t_end or (t == t_end and end is not None and n < end):
                end, t_end = n, t
    t_end = max(t_end, 0.0)
    path = []
    net = end
    while net in pred:
        c, who = pred[net]
        path.append(c)
        net = who[1] if who else None
    path.reverse()
    path.append("RCA")
    return t_end + rca_delay(tree.out_width, cells), path


# -- port reordering --------------------------------------------------------------


def reorder_ports(tree: CsaTree, cells: dict, input_arrival=None) -> CsaTree:
    """Rebind same-weight inputs of every cell so late signals use fast ports.

    A permutation is only accepted when no output of the cell gets later, so
    arrival times (and hence the critical path) can only improve.
    """
    arr: dict = {}
    if input_arrival is not None:
        if isinstance(input_arrival, dict):
            arr.update(input_arrival)
        else:
            for row in tree.input_nets():
                for n in row:
                    arr[n] = float(input_arrival)
    new_cells = []
    for c in tree.cells:
        model = cells[c.kind]
        ports = [p for p, _ in c.inputs]
        nets = [n for _, n in c.inputs]
        outs = [p for p, _ in c.outputs]

        def out_arr(assign):
            res = []
            for o in outs:
                t = 0.0
                for p, n in zip(ports, assign):
                    d = model.delay(p, o)
                    if d is not None:
                        t = max(t, arr.get(n, 0.0) + d)
                res.append(t)
            return res

        cur = out_arr(nets)
        best, best_key = list(nets), (max(cur), sum(cur), 0, tuple(nets))
        if len(nets) > 1:
            for perm in permutations(nets):
                perm = list(perm)
                oa = out_arr(perm)
                if any(a > b + 1e-9 for a, b in zip(oa, cur)):
                    continue
                key = (max(oa), sum(oa), 0 if perm == nets else 1, tuple(perm))
                if key < best_key:
                    best, best_key = perm, key
        for o, t in zip(outs, out_arr(best)):
            arr[c.output_net(o)] = t
        new_cells.append(replace(c, inputs=tuple(zip(ports, best))))
    return replace(tree, cells=tuple(new_cells))


# -- evaluation & verification ----------------------------------------------------


def _eval_cell(kind: str, v: dict, mask: int) -> dict:
    if kind == "FA":
        a, b, c = v["a"], v["b"], v["cin"]
        return {"sum": a ^ b ^ c, "carry": (a & b) | (c & (a ^ b))}
    if kind == "HA":
        a, b = v["a"], v["b"]
        return {"sum": a ^ b, "carry": a & b}
    if kind == "C42":
        x1, x2, x3, x4, ci = v["x1"], v["x2"], v["x3"], v["x4"], v["cin"]
        s1 = x1 ^ x2 ^ x3
        return {
            "cout": (x1 & x2) | (x3 & (x1 ^ x2)),
            "sum": s1 ^ x4 ^ ci,
            "carry": (s1 & x4) | (ci & (s1 ^ x4)),
        }
    if kind == "NOT":
        return {"y": v["a"] ^ mask}
    raise ValueError(kind)


def evaluate_lanes(tree: CsaTree, operand_bits, lanes: int) -> list:
    """Evaluate on lane-packed integers; ``operand_bits[i][j]`` holds bit j of operand i."""
    mask = (1 << lanes) - 1
    val = {CONST0: 0, CONST1: mask}
    for i in range(tree.operands):
        for j in range(tree.width):
            val[input_net(i, j)] = operand_bits[i][j]
    for c in tree.all_cells():
        res = _eval_cell(c.kind, {p: val[n] for p, n in c.inputs}, mask)
        for p, n in c.outputs:
            val[n] = res[p]
    return [val[n] for n in tree.out_bits]


def evaluate(tree: CsaTree, operands) -> int:
    """Sum of integer operands as computed by the tree (two's complement if signed)."""
    bits = [[(int(x) >> j) & 1 for j in range(tree.width)] for x in operands]
    out = evaluate_lanes(tree, bits, 1)
    v = sum(b << k for k, b in enumerate(out))
    if tree.signed and v >> (tree.out_width - 1):
        v -= 1 << tree.out_width
    return v


def pack_lanes(bits: np.ndarray) -> int:
    """Pack a 1-D array of 0/1 into a lane integer (lane 0 = LSB)."""
    return int.from_bytes(np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes(), "little")


def unpack_lanes(value: int, lanes: int) -> np.ndarray:
    nbytes = (lanes + 7) // 8
    raw = np.frombuffer(value.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:lanes]


@dataclass
class VerificationReport:
    passed: bool
    checked: int
    exhaustive: bool
    counterexample: dict | None = None

    def __str__(self):
        mode = "exhaustive" if self.exhaustive else "random"
        if self.passed:
            return f"PASS ({mode}, {self.checked} vectors)"
        return f"FAIL ({mode}, {self.checked} vectors): {self.counterexample}"


def verify_tree(tree: CsaTree, trials: int = 10000, seed: int = 0) -> VerificationReport:
    """Check sum(operands) == tree output, exhaustively when H*w <= 20 bits."""
    H, w = tree.operands, tree.width
    nbits = H * w
    if nbits <= 20:
        lanes = 1 << nbits
        idx = np.arange(lanes, dtype=np.int64)
        raw = [[((idx >> (i * w + j)) & 1) for j in range(w)] for i in range(H)]
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        lanes = trials
        raw = [[rng.integers(0, 2, size=lanes, dtype=np.int64) for _ in range(w)] for _ in range(H)]
        exhaustive = False
    values = np.zeros(lanes, dtype=np.int64)
    for i in range(H):
        op = np.zeros(lanes, dtype=np.int64)
        for j in range(w):
            weight = -(1 << j) if (tree.signed and j == w - 1 and w > 1) else (1 << j)
            op += raw[i][j] * weight
        values += op
    expected = values % (1 << tree.out_width)
    packed = [[pack_lanes(raw[i][j]) for j in range(w)] for i in range(H)]
    out = evaluate_lanes(tree, packed, lanes)
    got = np.zeros(lanes, dtype=np.int64)
    for k, o in enumerate(out):
        got += unpack_lanes(o, lanes).astype(np.int64) << k
    bad = np.nonzero(got != expected)[0]
    if len(bad):
        lane = int(bad[0])
        ops = []
        for i in range(H):
            v = sum(int(raw[i][j][lane]) << j for j in range(w))
            if tree.signed and w > 1 and v >> (w - 1):
                v -= 1 << w
            ops.append(v)
        return VerificationReport(False, lanes, exhaustive,
                                  {"operands": ops, "expected": int(expected[lane]), "got": int(got[lane])})
    return VerificationReport(True, lanes, exhaustive)


def random_operands(H: int, w: int, rng: random.Random, signed: bool = False) -> list:
    if signed:
        return [rng.randrange(-(1 << (w - 1)), 1 << (w - 1)) for _ in range(H)]
    return [rng.randrange(0, 1 << w) for _ in range(H)]
