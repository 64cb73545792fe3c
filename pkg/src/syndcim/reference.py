"""Generator for the shipped reference library.

All numbers are artifact data in normalized units: TAU ps per gate-delay unit,
EPS fJ per full-adder energy unit, ALPHA um^2 per full-adder area unit.  Block
tables come from first-order parametric models; adder-tree tables come from
actually synthesizing each tree with :mod:`syndcim.adder_tree`.
"""

from __future__ import annotations

import math
from pathlib import Path

from . import adder_tree
from .library import (
    BinLadder,
    CellModel,
    Corner,
    Library,
    PpaRecord,
    ScalingRule,
    SubcircuitKind,
    SubcircuitVariant,
    save_library,
)

TAU = 20.0
EPS = 1.0
ALPHA = 1.0

POW2_DIMS = [8, 16, 32, 64, 128, 256, 512, 1024]
TREE_OPERANDS = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]
MCRS = [1, 2, 4, 8]
ACC_WIDTHS = list(range(5, 27))
OFU_WIDTHS = list(range(5, 45))
EXPONENT_BITS = [2, 4, 8]

CORNERS = [Corner("0v9", 1.0, 1.0, 1.0), Corner("1v2", 0.6, 1.78, 2.0), Corner("0v7", 2.2, 0.6, 0.6)]

# (delay, energy, area) multipliers of the driver sizings characterized per block
SIZINGS = [(1.0, 1.0, 1.0), (0.8, 1.15, 1.2), (0.65, 1.35, 1.5)]

LEAK_PER_AREA = 0.01  # uW per um^2 at the nominal corner
SPARSITY_K = 1.0


def _port(d: dict) -> dict:
    return {i: {o: v * TAU for o, v in outs.items()} for i, outs in d.items()}


def reference_cells() -> dict:
    two = lambda t: {"a": {"y": t}, "b": {"y": t}}  # noqa: E731
    spec = {
        "FA": (1.0, 1.0, {"a": {"sum": 2.0, "carry": 1.5}, "b": {"sum": 2.0, "carry": 1.5},
                          "cin": {"sum": 1.0, "carry": 1.0}}),
        "HA": (0.5, 0.6, {"a": {"sum": 1.0, "carry": 0.5}, "b": {"sum": 0.8, "carry": 0.5}}),
        "C42": (1.6, 1.8, {**{x: {"sum": 4.5, "carry": 4.0, "cout": 2.0} for x in ("x1", "x2", "x3")},
                           "x4": {"sum": 3.0, "carry": 2.5}, "cin": {"sum": 2.0, "carry": 1.5}}),
        "NOT": (0.1, 0.25, {"a": {"y": 0.5}}),
        "NAND": (0.15, 0.3, two(1.0)),
        "NOR": (0.15, 0.3, two(0.5)),
        "AND": (0.2, 0.4, two(1.2)),
        "OR": (0.2, 0.4, two(1.2)),
        "XOR": (0.3, 0.6, two(1.5)),
        "MUX2": (0.2, 0.5, {"a": {"y": 0.3}, "b": {"y": 0.3}, "s": {"y": 0.3}}),
        "DFF": (0.4, 1.2, {"d": {"q": 1.0}}),
    }
    return {
        name: CellModel(name, e * EPS, a * ALPHA, a * ALPHA * LEAK_PER_AREA, _port(d))
        for name, (e, a, d) in spec.items()
    }


def lg(x: float) -> float:
    return math.log2(x)


# -- block models: dims -> (delay tau, energy eps, area alpha, leakage factor) ----------

ALIGN = {
    # topology: (comparator delay per exponent bit, energy per row per squared exponent bit, fixed energy per row, area factor)
    "cmp_tree_e4": (0.25, 2.1, 21.0, 1.0),
    "cmp_tree_e8": (0.25, 2.2, 22.0, 1.3),
}

MEMORY_CELLS = {
    # topology: (write time, read energy per active cell, area per cell, leakage factor)
    "6t2t": (5.0, 0.10, 0.30, 1.5),
    "8t_dlatch": (4.0, 0.06, 0.40, 1.0),
    "12t_oai": (3.0, 0.02, 0.55, 0.7),
}

MULTIPLIERS = {
    # topology: (base delay, delay per select stage, energy per multiplier, fixed area, area per stored set, mcr max)
    "1t_pass": (0.9, 0.45, 0.36, 0.05, 0.04, 1 << 30),
    "oai22_fused": (0.6, 0.30, 0.18, 0.16, 0.04, 2),
    "tg2t_nor": (0.5, 0.30, 0.08, 0.12, 0.12, 1 << 30),
}


def align_model(topo: str, H: int, e: int):
    per_bit, e_bit, e_row, af = ALIGN[topo]
    delay = lg(H) * (0.5 + per_bit * e) + 1.2
    energy = H * (e_bit * e * e + e_row)
    area = H * (1.5 * e + 8.0) * af
    return delay, energy, area, 1.0


def wl_model(H: int, W: int):
    return 1.0 + 0.5 * (lg(H) + lg(W)), H * (1.0 + 0.02 * W), H * (0.4 + 0.01 * W), 1.0


def bl_model(rows: int, W: int):
    return 1.0 + 0.5 * lg(rows), 0.02 * rows * W, W * (0.6 + 0.01 * rows), 1.0


def cell_model(topo: str, H: int, W: int, M: int):
    tw, e, a, lf = MEMORY_CELLS[topo]
    return tw, e * H * W, a * H * W * M, lf


def mult_model(topo: str, H: int, W: int, M: int):
    d0, ds, e, a0, a1, _ = MULTIPLIERS[topo]
    stages = lg(M)
    return d0 + ds * stages, e * H * W * (1 + 0.15 * stages), (a0 + a1 * M) * H * W, 1.0


def shift_add_model(aw: int, W: int):
    return aw * 1.5 + 1.1, W * aw * 1.6, W * aw * 2.5, 1.0


def ofu_model(iw: int, groups: int):
    n = iw + 1
    return n * 1.5 + 0.5, groups * n * 1.2, groups * n * 2.2, 1.0


# -- table generation --------------------------------------------------------------------


def _records(dims, model, corners, ladder, sized=True):
    delay, energy, area, lf = model
    out = {}
    for c in corners:
        for ds, es, as_ in SIZINGS if sized else SIZINGS[:1]:
            d = delay * ds * TAU * c.delay_scale
            e = energy * es * EPS * c.energy_scale
            a = area * as_ * ALPHA
            leak = a * LEAK_PER_AREA * lf * c.leakage_scale
            b = ladder.snap(d)
            rec = PpaRecord(tuple(dims), b, c.name, round(d, 6), round(e, 6), round(leak, 6), round(a, 6))
            k = rec.key
            if k not in out or (rec.energy_fj, rec.area_um2) < (out[k].energy_fj, out[k].area_um2):
                out[k] = rec
    return list(out.values())


def tree_records(topo: str, H: int, cells_by_corner: dict, ladder: BinLadder) -> list:
    out = []
    for cname, cells in cells_by_corner.items():
        if topo == "signed_rca":
            picks = [(adder_tree.build_rca_tree(H, 1, cells), None)]
        elif topo == "cmp42_csa":
            picks = [(adder_tree.compressor_tree(H, 1, cells), None)]
        else:
            # the tree the budget policy returns at each bin, kept at the smallest such bin
            loosest, _ = adder_tree.critical_path(adder_tree.compressor_tree(H, 1, cells), cells)
            picks, seen, k = [], set(), 0
            while True:
                b = ladder.bin(k)
                k += 1
                try:
                    t = adder_tree.build_csa_tree(H, 1, b, cells)
                except adder_tree.BudgetInfeasible:
                    continue
                if t.policy not in seen:
                    seen.add(t.policy)
                    picks.append((t, b))
                if b >= loosest:
                    break
        for t, b in picks:
            d, _ = adder_tree.critical_path(t, cells)
            b = b if b is not None else ladder.snap(d)
            area = t.area(cells)
            leak = sum(cells[c.kind].leakage_uw for c in t.all_cells())
            out.append(PpaRecord((H, 1), b, cname, round(d, 6), round(t.energy(cells), 6), round(leak, 6),
                                 round(area, 6)))
    return out


def build_reference_library() -> Library:
    ladder = BinLadder()
    cells = reference_cells()
    cells_by_corner = {}
    for c in CORNERS:
        cells_by_corner[c.name] = {n: m.scaled(c.delay_scale, c.energy_scale, c.leakage_scale) for n, m in cells.items()}

    K = SubcircuitKind
    variants = []

    def add(kind, topo, records, **kw):
        variants.append(SubcircuitVariant(kind=kind, topology_id=topo, records=tuple(records), **kw))

    for topo, emax in (("cmp_tree_e4", 4), ("cmp_tree_e8", 8)):
        recs = []
        for H in POW2_DIMS:
            for e in EXPONENT_BITS:
                if e <= emax:
                    recs += _records((H, e), align_model(topo, H, e), CORNERS, ladder)
        add(K.FpIntAlign, topo, recs, dim_min=(1, 1), dim_max=(1024, emax),
            precision_kinds=frozenset({"floating"}), max_exponent_bits=emax)

    add(K.WlDriver, "inv_chain",
        [r for H in POW2_DIMS for W in POW2_DIMS for r in _records((H, W), wl_model(H, W), CORNERS, ladder)],
        dim_min=(1, 1), dim_max=(1024, 1024))
    add(K.BlDriver, "tg_writer",
        [r for rows in POW2_DIMS + [2048, 4096, 8192] for W in POW2_DIMS
         for r in _records((rows, W), bl_model(rows, W), CORNERS, ladder)],
        dim_min=(1, 1), dim_max=(8192, 1024))
    for topo in MEMORY_CELLS:
        add(K.MemoryCell, topo,
            [r for H in POW2_DIMS for W in POW2_DIMS for M in MCRS
             for r in _records((H, W, M), cell_model(topo, H, W, M), CORNERS, ladder, sized=False)],
            mcr_range=(1, 8), dim_min=(1, 1, 1), dim_max=(1024, 1024, 8))
    for topo, spec in MULTIPLIERS.items():
        mmax = min(spec[5], 8)
        add(K.MultiplierMux, topo,
            [r for H in POW2_DIMS for W in POW2_DIMS for M in MCRS if M <= mmax
             for r in _records((H, W, M), mult_model(topo, H, W, M), CORNERS, ladder)],
            mcr_range=(1, mmax), dim_min=(1, 1, 1), dim_max=(1024, 1024, mmax))
    for topo in ("cmp42_csa", "mixed_csa", "signed_rca"):
        add(K.AdderTree, topo, [r for H in TREE_OPERANDS for r in tree_records(topo, H, cells_by_corner, ladder)],
            dim_min=(2, 1), dim_max=(1024, 1))
    add(K.ShiftAdd, "rca_acc",
        [r for aw in ACC_WIDTHS for W in POW2_DIMS for r in _records((aw, W), shift_add_model(aw, W), CORNERS, ladder)],
        dim_min=(2, 1), dim_max=(64, 1024))
    add(K.OutputFusion, "rca_fuse",
        [r for iw in OFU_WIDTHS for g in [1 << k for k in range(10)]
         for r in _records((iw, g), ofu_model(iw, g), CORNERS, ladder)],
        dim_min=(2, 1), dim_max=(64, 512))

    scaling = {
        K.FpIntAlign: ScalingRule((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0,), 0.5 * 0.5 * TAU),
        K.WlDriver: ScalingRule((1.0, 1.0), (1.0, 0.5), (1.0, 0.5), (0, 1), 0.5 * TAU),
        K.BlDriver: ScalingRule((1.0, 1.0), (0.5, 1.0), (0.5, 1.0), (0,), 0.5 * TAU),
        K.MemoryCell: ScalingRule((1.0, 1.0, 0.0), (1.0, 1.0, 1.0), (1.0, 1.0, 1.0)),
        K.MultiplierMux: ScalingRule((1.0, 1.0, 0.1), (1.0, 1.0, 0.5), (1.0, 1.0, 0.5), (2,), 0.3 * TAU),
        K.AdderTree: ScalingRule((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0,), 2.0 * TAU),
        K.ShiftAdd: ScalingRule((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0,), 1.5 * TAU),
        K.OutputFusion: ScalingRule((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0,), 1.5 * TAU),
    }
    return Library(
        name="reference",
        corners={c.name: c for c in CORNERS},
        cells=cells,
        variants=tuple(variants),
        scaling=scaling,
        ladder=ladder,
        sparsity_k=SPARSITY_K,
        leakage_per_area_uw=LEAK_PER_AREA,
    )


def write_reference_library(root) -> Path:
    lib = build_reference_library()
    return save_library(lib, root, units={"delay_ps": TAU, "energy_fj": EPS, "area_um2": ALPHA})


def default_output_dir() -> Path:
    return Path(__file__).parent / "data" / "reference_library"
