"""Heuristic hierarchical search over the subcircuit space and Pareto filtering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .library import Library, SubcircuitKind, enumerate_configs, kind_requirements, ofu_widths, query
from .ppa import evaluate, objectives
from .spec_model import MacroSpec, Preference
from .timing import (
    AlreadyRetimed,
    MacroDesign,
    MinHeightReached,
    NoSlack,
    NotApplicable,
    PipelineLimit,
    add_ofu_pipeline,
    mac_stage,
    make_design,
    max_stage_delay,
    meets_timing,
    merge_registers,
    ofu_only,
    retime_adder,
    retime_ofu,
    split_column,
    substitute,
)

K = SubcircuitKind

FRONTIER_HEADER = ["design_id", "adder_topology", "split_factor", "stages", "power_mw", "area_um2", "latency_cycles",
                   "energy_fj_per_mac", "tops", "tops_per_w", "tops_per_mm2"]


class EmptyFrontier(Exception):
    def __init__(self, message: str, nearest_miss: dict | None = None):
        super().__init__(message)
        self.nearest_miss = nearest_miss or {}


@dataclass
class ParetoPoint:
    design: MacroDesign
    objectives: tuple
    design_id: str = ""
    dominated: bool = False

    @property
    def topology_ids(self) -> tuple:
        return tuple(b.topology_id for b in self.design.bindings)


@dataclass
class SearchResult:
    frontier: list
    points: list
    abandoned: list = field(default_factory=list)

    @property
    def base_configs(self) -> int:
        return len(self.points) + len(self.abandoned)


@dataclass
class _Abandon(Exception):
    reason: str
    design: MacroDesign | None = None


# -- assembly ----------------------------------------------------------------------------


def _dims(spec: MacroSpec, kind: SubcircuitKind) -> tuple:
    return kind_requirements(spec, kind)["dims"]


def assemble(spec: MacroSpec, library: Library, config: dict) -> MacroDesign:
    """Bind every kind: fastest record for blocks, loosest record for the adder tree."""
    bindings = {}
    for kind, variant in config.items():
        if kind == K.OutputFusion:
            continue
        dims = (spec.height, 1) if kind == K.AdderTree else _dims(spec, kind)
        recs = library.resolve(variant, dims, spec.corner)
        if not recs:
            raise _Abandon(f"{kind.label}/{variant.topology_id}: no record for {dims}")
        if kind == K.AdderTree:
            rec = max(recs, key=lambda r: (r.timing_bin_ps, -r.energy_fj))
        else:
            rec = min(recs, key=lambda r: (r.delay_ps, r.energy_fj, r.key))
        bindings[kind] = (variant.topology_id, rec)
    ofu = []
    if K.OutputFusion in config:
        variant = config[K.OutputFusion]
        widths = ofu_widths(_acc_w(spec), _n_ofu(spec))
        for s in range(1, len(widths)):
            dims = (widths[s - 1], max(1, spec.width >> s))
            recs = library.resolve(variant, dims, spec.corner)
            if not recs:
                raise _Abandon(f"output_fusion/{variant.topology_id}: no record for {dims}")
            ofu.append(min(recs, key=lambda r: (r.delay_ps, r.energy_fj, r.key)))
        bindings[K.OutputFusion] = (variant.topology_id, ofu[0])
    return make_design(spec, library, bindings, ofu)


def _acc_w(spec):
    from .library import acc_width

    return acc_width(spec.height, spec.max_input_bits)


def _n_ofu(spec):
    from .library import ofu_stage_count

    return ofu_stage_count(spec.max_weight_bits)


# -- algorithm steps ------------------------------------------------------------------------


def faster_adder(design: MacroDesign):
    """Slowest same-family adder record that brings the MAC stage within budget, if any."""
    spec, lib = design.spec, design.library
    b = design.binding(K.AdderTree)
    dims = (design.tree_operands, 1)
    cands = [(v, r) for v, r in query(lib, K.AdderTree, dims, spec.mcr, b.record.delay_ps - 1e-9, spec.corner)
             if v.topology_id == b.topology_id]
    for v, r in reversed(cands):
        d = design.with_binding(K.AdderTree, v.topology_id, r)
        if d.stage_delay(mac_stage(d)) <= d.budget_ps:
            return substitute(design, K.AdderTree, v.topology_id, r)
    return None


def fix_mac(design: MacroDesign) -> MacroDesign:
    d = design
    while d.stage_delay(mac_stage(d)) > d.budget_ps:
        nd = faster_adder(d)
        if nd is not None:
            d = nd
            continue
        try:
            d = retime_adder(d)
            continue
        except (AlreadyRetimed, NoSlack, NotApplicable):
            pass
        try:
            d = split_column(d)
        except MinHeightReached as e:
            raise _Abandon(f"MAC stage still fails: {e}", d) from None
    return d


def fix_ofu(design: MacroDesign) -> MacroDesign:
    d = design
    while any(ofu_only(st) and d.stage_delay(st) > d.budget_ps for st in d.stages):
        try:
            d = retime_ofu(d)
            continue
        except (NoSlack, NotApplicable):
            pass
        try:
            d = add_ofu_pipeline(d)
        except PipelineLimit as e:
            raise _Abandon(f"fusion stage still fails: {e}", d) from None
    return d


def _slack_order(design: MacroDesign) -> list:
    """Fine-tunable blocks as (slack, order, kind, ofu stage), most slack first."""
    items = []
    order = 0
    for kind, block in ((K.FpIntAlign, "align"), (K.WlDriver, "wl"), (K.MultiplierMux, "mult"),
                        (K.AdderTree, "csa"), (K.ShiftAdd, "shift_add")):
        if design.binding(kind) is None:
            continue
        slack = design.budget_ps - design.stage_delay(design.stage_of(block))
        items.append((slack, order, kind, 0))
        order += 1
    for s in range(1, design.n_ofu + 1):
        slack = design.budget_ps - design.stage_delay(design.stage_of(f"ofu_{s}"))
        items.append((slack, order, K.OutputFusion, s))
        order += 1
    items.append((design.wupd_budget_ps - design.weight_update_delay, order, K.BlDriver, 0))
    items.sort(key=lambda x: (-x[0], x[1]))
    return items


def fine_tune(design: MacroDesign) -> MacroDesign:
    """Relax blocks to cheaper records while timing holds, in decreasing-slack order."""
    d = design
    lib, spec = d.library, d.spec
    for _, _, kind, stage in _slack_order(d):
        if kind == K.OutputFusion:
            cur = d.ofu_records[stage - 1]
            topo = d.topology(kind)
        else:
            cur = d.record(kind)
            topo = d.topology(kind)
        variant = lib.variant(kind, topo)
        cands = [r for r in lib.resolve(variant, cur.dims, spec.corner)
                 if r.energy_fj <= cur.energy_fj and r.area_um2 <= cur.area_um2
                 and (r.energy_fj < cur.energy_fj or r.area_um2 < cur.area_um2)]
        cands.sort(key=lambda r: (r.energy_fj, r.area_um2, r.key))
        for r in cands:
            nd = substitute(d, kind, topo, r, stage)
            if meets_timing(nd):
                d = nd
                break
    return d


def optimize(spec: MacroSpec, library: Library, config: dict) -> MacroDesign:
    """Assemble, fix timing, merge and fine-tune one base configuration (raises _Abandon)."""
    d = assemble(spec, library, config)
    d = fix_mac(d)
    d = fix_ofu(d)
    if d.weight_update_delay > d.wupd_budget_ps:
        raise _Abandon(f"weight update path {d.weight_update_delay:.1f} ps exceeds {d.wupd_budget_ps:.1f} ps", d)
    if not meets_timing(d):
        worst = max(d.stages, key=d.stage_delay)
        raise _Abandon(f"stage {'+'.join(worst)} takes {d.stage_delay(worst):.1f} ps > {d.budget_ps:.1f} ps", d)
    d = merge_registers(d)
    d = fine_tune(d)
    return d


# -- Pareto ----------------------------------------------------------------------------------


def _obj(p):
    return tuple(p.objectives) if hasattr(p, "objectives") else tuple(p)


def dominates(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(points) -> list:
    """Non-dominated subset (all objectives minimized), in input order."""
    objs = [_obj(p) for p in points]
    keep = []
    for i, p in enumerate(points):
        if not any(dominates(objs[j], objs[i]) for j in range(len(points)) if j != i):
            keep.append(p)
    return keep


def select(frontier, preference: Preference):
    """Argmin of the preference-weighted sum of min-max-normalized objectives."""
    if not frontier:
        raise EmptyFrontier("cannot select from an empty frontier")
    objs = [_obj(p) for p in frontier]
    n = len(objs[0])
    lo = [min(o[i] for o in objs) for i in range(n)]
    hi = [max(o[i] for o in objs) for i in range(n)]
    w = preference.as_tuple() if hasattr(preference, "as_tuple") else tuple(preference)

    def score(o):
        return sum(wi * ((o[i] - lo[i]) / (hi[i] - lo[i]) if hi[i] > lo[i] else 0.0) for i, wi in enumerate(w))

    def key(idx):
        p = frontier[idx]
        topo = p.topology_ids if hasattr(p, "topology_ids") else ()
        return (score(objs[idx]), objs[idx], topo)

    best = min(range(len(frontier)), key=key)
    p = frontier[best]
    return p.design if hasattr(p, "design") else p


# -- driver ------------------------------------------------------------------------------------


def search(spec: MacroSpec, library: Library) -> SearchResult:
    """Run the hierarchical search on every base configuration and return the frontier."""
    space = enumerate_configs(spec, library)
    points, abandoned = [], []
    for config in space.configurations():
        try:
            d = optimize(spec, library, config)
        except _Abandon as a:
            abandoned.append((config, a.reason, a.design))
            continue
        points.append(ParetoPoint(d, objectives(d)))
    if not points:
        raise EmptyFrontier(_miss_message(spec, abandoned), _nearest_miss(spec, abandoned))
    unique, seen = [], set()
    for p in points:
        key = tuple(round(x, 9) for x in p.objectives)
        if key not in seen:
            seen.add(key)
            unique.append(p)
    front = pareto_front(unique)
    front.sort(key=lambda p: (p.objectives, p.topology_ids))
    for i, p in enumerate(front):
        p.design_id = f"d{i:03d}"
    keep = {id(p) for p in front}
    for p in points:
        p.dominated = id(p) not in keep
    return SearchResult(front, points, abandoned)


def _nearest_miss(spec, abandoned) -> dict:
    best = None
    for config, reason, d in abandoned:
        if d is None:
            continue
        worst = max_stage_delay(d)
        if best is None or worst < best["worst_stage_ps"]:
            best = {
                "worst_stage_ps": worst,
                "budget_ps": d.budget_ps,
                "fmax_hz": 0.95e12 / worst,
                "reason": reason,
                "topologies": {k.label: v.topology_id for k, v in config.items()},
            }
    return best or {}


def _miss_message(spec, abandoned) -> str:
    m = _nearest_miss(spec, abandoned)
    if not m:
        return "no configuration could be assembled"
    return (f"no configuration meets {spec.mac_frequency_hz / 1e6:.1f} MHz; nearest miss reaches "
            f"{m['fmax_hz'] / 1e6:.1f} MHz ({m['reason']})")


def frontier_rows(frontier) -> list:
    rows = []
    for p in frontier:
        d = p.design
        s = evaluate(d, d.spec.reference_precision)
        rows.append({
            "design_id": p.design_id,
            "adder_topology": d.topology(K.AdderTree),
            "split_factor": d.split,
            "stages": "|".join("+".join(st) for st in d.stages),
            "power_mw": p.objectives[0],
            "area_um2": p.objectives[1],
            "latency_cycles": p.objectives[2],
            "energy_fj_per_mac": s.energy_fj_per_mac,
            "tops": s.tops,
            "tops_per_w": s.tops_per_w,
            "tops_per_mm2": s.tops_per_mm2_1b1b,
        })
    return rows


def frontier_csv(frontier) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONTIER_HEADER)
    for r in frontier_rows(frontier):
        w.writerow([r["design_id"], r["adder_topology"], r["split_factor"], r["stages"],
                    f"{r['power_mw']:.6f}", f"{r['area_um2']:.3f}", r["latency_cycles"],
                    f"{r['energy_fj_per_mac']:.6f}", f"{r['tops']:.6f}", f"{r['tops_per_w']:.4f}",
                    f"{r['tops_per_mm2']:.4f}"])
    return buf.getvalue()


def is_finite_point(p) -> bool:
    return all(math.isfinite(x) for x in _obj(p))
