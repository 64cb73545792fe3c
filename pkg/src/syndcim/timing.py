"""Pipeline timing of a bound macro design and the structural transforms.

A design's datapath is a fixed chain of blocks::

    [align] | wl mult csa [merge] rca | shift_add | ofu_1 ... ofu_n

and the pipeline is described by the set of blocks followed by a register
("cuts").  Transforms move, add or remove cuts (and, for column splitting,
rebind the adder to a shorter tree plus a merge level).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from functools import cached_property

from . import adder_tree
from .adder_tree import _CellsView
from .library import Library, PpaRecord, SubcircuitKind, ofu_stage_count
from .spec_model import MacroSpec

SETUP_MARGIN = 0.05
MIN_SPLIT_HEIGHT = 8
MAX_OFU_STAGES = 4

K = SubcircuitKind


class TimingError(Exception):
    pass


class NoSlack(TimingError):
    pass


class AlreadyRetimed(TimingError):
    pass


class MinHeightReached(TimingError):
    pass


class PipelineLimit(TimingError):
    pass


class NotApplicable(TimingError):
    pass


@dataclass(frozen=True)
class Binding:
    kind: SubcircuitKind
    topology_id: str
    record: PpaRecord


@dataclass(frozen=True)
class LogEntry:
    name: str
    params: tuple = ()

    def line(self) -> str:
        parts = [self.name] + [f"{k}={v}" for k, v in self.params]
        return ", ".join(parts)

    @classmethod
    def parse(cls, line: str) -> "LogEntry":
        parts = [p.strip() for p in line.strip().split(",")]
        params = []
        for p in parts[1:]:
            k, _, v = p.partition("=")
            params.append((k, v))
        return cls(parts[0], tuple(params))

    def get(self, key: str, default=None):
        return dict(self.params).get(key, default)


@functools.lru_cache(maxsize=2048)
def _tree(topology: str, operands: int, bin_ps: float, cells: _CellsView) -> adder_tree.CsaTree:
    return adder_tree.tree_for_topology(topology, operands, 1, cells, bin_ps)


@functools.lru_cache(maxsize=256)
def _merge_tree(split: int, row_width: int, out_width: int, cells: _CellsView) -> adder_tree.CsaTree:
    return adder_tree.build_policy_tree(2 * split, row_width, cells, out_width=out_width)


@functools.lru_cache(maxsize=4096)
def _csa_delay(tree: adder_tree.CsaTree, cells: _CellsView) -> float:
    return adder_tree.csa_delay(tree, cells)


@dataclass(frozen=True)
class StageTiming:
    index: int
    name: str
    delay_ps: float
    blocks: tuple
    worst_path: tuple


@dataclass(frozen=True)
class MacroDesign:
    spec: MacroSpec
    library: Library = field(compare=False, repr=False)
    bindings: tuple = ()  # Binding per kind, in SubcircuitKind order
    ofu_records: tuple = ()  # one PpaRecord per fusion sub-stage
    split: int = 1
    cuts: frozenset = frozenset()
    log: tuple = ()

    # -- structure -----------------------------------------------------------------

    @property
    def n_ofu(self) -> int:
        return len(self.ofu_records)

    @property
    def has_align(self) -> bool:
        return self.binding(K.FpIntAlign) is not None

    @property
    def blocks(self) -> tuple:
        out = ["align"] if self.has_align else []
        out += ["wl", "mult", "csa"]
        if self.split > 1:
            out.append("merge")
        out += ["rca", "shift_add"]
        out += [f"ofu_{s}" for s in range(1, self.n_ofu + 1)]
        return tuple(out)

    @property
    def stages(self) -> tuple:
        """Blocks grouped into pipeline stages, front to back."""
        out, cur = [], []
        for b in self.blocks:
            cur.append(b)
            if b in self.cuts:
                out.append(tuple(cur))
                cur = []
        if cur:
            out.append(tuple(cur))
        return tuple(out)

    @property
    def latency_cycles(self) -> int:
        return len(self.stages)

    def binding(self, kind: SubcircuitKind):
        for b in self.bindings:
            if b.kind == kind:
                return b
        return None

    def record(self, kind: SubcircuitKind) -> PpaRecord:
        return self.binding(kind).record

    def topology(self, kind: SubcircuitKind) -> str:
        b = self.binding(kind)
        return b.topology_id if b else ""

    @property
    def tree_operands(self) -> int:
        return self.spec.height // self.split

    @cached_property
    def cells(self) -> _CellsView:
        return _CellsView(self.library.cells_at(self.spec.corner))

    @cached_property
    def adder_tree(self) -> adder_tree.CsaTree:
        b = self.binding(K.AdderTree)
        return _tree(b.topology_id, self.tree_operands, b.record.timing_bin_ps, self.cells)

    @property
    def out_width(self) -> int:
        return adder_tree.out_width_for(self.spec.height, 1, False)

    @cached_property
    def merge_tree(self):
        if self.split == 1:
            return None
        return _merge_tree(self.split, self.adder_tree.out_width, self.out_width, self.cells)

    # -- timing -----------------------------------------------------------------------

    @property
    def clock_ps(self) -> float:
        return 1e12 / self.spec.mac_frequency_hz

    @property
    def budget_ps(self) -> float:
        return self.clock_ps * (1 - SETUP_MARGIN)

    @property
    def wupd_budget_ps(self) -> float:
        return 1e12 / self.spec.weight_update_frequency_hz * (1 - SETUP_MARGIN)

    @cached_property
    def block_delays(self) -> dict:
        d = {}
        if self.has_align:
            d["align"] = self.record(K.FpIntAlign).delay_ps
        d["wl"] = self.record(K.WlDriver).delay_ps
        d["mult"] = self.record(K.MultiplierMux).delay_ps
        d["csa"] = _csa_delay(self.adder_tree, self.cells)
        if self.split > 1:
            d["merge"] = _csa_delay(self.merge_tree, self.cells)
        d["rca"] = adder_tree.rca_delay(self.out_width, self.cells)
        d["shift_add"] = self.record(K.ShiftAdd).delay_ps
        for s, r in enumerate(self.ofu_records, start=1):
            d[f"ofu_{s}"] = r.delay_ps
        return d

    def stage_delay(self, stage) -> float:
        return sum(self.block_delays[b] for b in stage)

    @property
    def weight_update_delay(self) -> float:
        return self.record(K.BlDriver).delay_ps + self.record(K.MemoryCell).delay_ps

    # -- helpers ------------------------------------------------------------------------

    def with_binding(self, kind: SubcircuitKind, topology_id: str, record: PpaRecord) -> "MacroDesign":
        bs = tuple(Binding(kind, topology_id, record) if b.kind == kind else b for b in self.bindings)
        return replace(self, bindings=bs)

    def with_ofu_record(self, stage: int, record: PpaRecord) -> "MacroDesign":
        recs = list(self.ofu_records)
        recs[stage - 1] = record
        return replace(self, ofu_records=tuple(recs))

    def logged(self, name: str, **params) -> "MacroDesign":
        entry = LogEntry(name, tuple((k, _fmt(v)) for k, v in params.items()))
        return replace(self, log=self.log + (entry,))

    def log_text(self) -> str:
        return "".join(e.line() + "\n" for e in self.log)

    def stage_index(self, block: str) -> int:
        for i, st in enumerate(self.stages):
            if block in st:
                return i
        raise KeyError(block)

    def stage_of(self, block: str) -> tuple:
        return self.stages[self.stage_index(block)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ":".join(str(x) for x in v)
    return str(v)


def stage_name(stage: tuple) -> str:
    if "align" in stage:
        return "align"
    if "csa" in stage:
        return "mac"
    if "shift_add" in stage or stage[0] in ("merge", "rca"):
        return "sa"
    return "ofu"


def stage_delays(design: MacroDesign) -> list:
    out = []
    for i, st in enumerate(design.stages):
        out.append(StageTiming(i, stage_name(st), design.stage_delay(st), st, st))
    return out


def meets_timing(design: MacroDesign) -> bool:
    b = design.budget_ps
    if any(design.stage_delay(st) > b for st in design.stages):
        return False
    return design.weight_update_delay <= design.wupd_budget_ps


def max_stage_delay(design: MacroDesign) -> float:
    return max(design.stage_delay(st) for st in design.stages)


def fmax_hz(design: MacroDesign) -> float:
    return (1 - SETUP_MARGIN) * 1e12 / max_stage_delay(design)


def mac_stage(design: MacroDesign) -> tuple:
    return design.stage_of("csa")


def ofu_only(stage: tuple) -> bool:
    return all(b.startswith("ofu_") for b in stage)


def ofu_stage_total(design: MacroDesign) -> int:
    return sum(1 for st in design.stages if ofu_only(st))


# -- base design -----------------------------------------------------------------------


def base_cuts(spec: MacroSpec, n_ofu: int, has_align: bool) -> frozenset:
    cuts = {"rca"}
    if has_align:
        cuts.add("align")
    if n_ofu:
        cuts.add("shift_add")
    return frozenset(cuts)


def make_design(spec: MacroSpec, library: Library, bindings: dict, ofu_records=()) -> MacroDesign:
    """Design with the default pipeline: align | MAC | S&A | OFU."""
    order = [k for k in SubcircuitKind if k in bindings and k != K.OutputFusion]
    bs = tuple(Binding(k, bindings[k][0], bindings[k][1]) for k in order)
    if K.OutputFusion in bindings:
        bs = bs + (Binding(K.OutputFusion, bindings[K.OutputFusion][0], bindings[K.OutputFusion][1]),)
    has_align = K.FpIntAlign in bindings
    n_ofu = len(ofu_records)
    if n_ofu != ofu_stage_count(spec.max_weight_bits):
        raise ValueError("one fusion record per sub-stage is required")
    return MacroDesign(spec, library, bs, tuple(ofu_records), 1, base_cuts(spec, n_ofu, has_align))


# -- transforms ------------------------------------------------------------------------------


def retime_adder(design: MacroDesign) -> MacroDesign:
    """Move the register at the adder output to the front of the final RCA."""
    if "csa" in design.cuts:
        raise AlreadyRetimed("the RCA already sits behind the pipeline register")
    if "rca" not in design.cuts:
        raise NotApplicable("no register between the adder and the S&A")
    sa = design.stage_of("shift_add")
    slack = design.budget_ps - design.stage_delay(sa)
    rca = design.block_delays["rca"]
    if slack < rca:
        raise NoSlack(f"S&A slack {slack:.1f} ps < RCA delay {rca:.1f} ps")
    d = replace(design, cuts=(design.cuts - {"rca"}) | {"csa"})
    return d.logged("retime_adder", rca_ps=round(rca, 3))


def _half_tree_record(design: MacroDesign):
    lib, spec = design.library, design.spec
    b = design.binding(K.AdderTree)
    variant = lib.variant(K.AdderTree, b.topology_id)
    half = design.tree_operands // 2
    cur = design.block_delays["csa"]
    cands = []
    for r in lib.resolve(variant, (half, 1), spec.corner):
        t = _tree(b.topology_id, half, r.timing_bin_ps, design.cells)
        cands.append((_csa_delay(t, design.cells), r))
    if not cands:
        raise MinHeightReached(f"no {b.topology_id} record for {half} operands")
    faster = [c for c in cands if c[0] < cur]
    if faster:
        return min(faster, key=lambda c: (c[1].energy_fj, c[1].area_um2, c[0], c[1].key))[1]
    return min(cands, key=lambda c: (c[0], c[1].energy_fj, c[1].key))[1]


def split_column(design: MacroDesign) -> MacroDesign:
    """Halve the tree height; the halves merge through an extra CSA level before the RCA."""
    if design.tree_operands < 2 * MIN_SPLIT_HEIGHT:
        raise MinHeightReached(f"tree height {design.tree_operands} cannot be halved below {MIN_SPLIT_HEIGHT}")
    rec = _half_tree_record(design)
    b = design.binding(K.AdderTree)
    cuts = set(design.cuts)
    if "rca" in cuts or "csa" in cuts:
        cuts.discard("rca")
        cuts.add("csa")
    d = replace(design.with_binding(K.AdderTree, b.topology_id, rec), split=design.split * 2, cuts=frozenset(cuts))
    return d.logged("split_column", split=d.split, topology=b.topology_id, bin_ps=rec.timing_bin_ps)


def _sa_end(design: MacroDesign) -> str:
    return design.stage_of("shift_add")[-1]


def retime_ofu(design: MacroDesign) -> MacroDesign:
    """Move the first fusion sub-stage behind the S&A into the S&A stage."""
    blocks = design.blocks
    end = _sa_end(design)
    i = blocks.index(end)
    if i + 1 >= len(blocks):
        raise NotApplicable("no fusion stage follows the S&A")
    nxt = blocks[i + 1]
    sa = design.stage_of("shift_add")
    slack = design.budget_ps - design.stage_delay(sa)
    need = design.block_delays[nxt]
    if slack < need:
        raise NoSlack(f"S&A slack {slack:.1f} ps < {nxt} delay {need:.1f} ps")
    cuts = set(design.cuts) - {end}
    if nxt != blocks[-1]:
        cuts.add(nxt)
    d = replace(design, cuts=frozenset(cuts))
    return d.logged("retime_ofu", block=nxt)


def _balanced_cut(design: MacroDesign, stage: tuple) -> str:
    delays = [design.block_delays[b] for b in stage]
    best = None
    for k in range(1, len(stage)):
        cost = max(sum(delays[:k]), sum(delays[k:]))
        if best is None or cost < best[0] - 1e-9:
            best = (cost, stage[k - 1])
    return best[1]


def add_ofu_pipeline(design: MacroDesign) -> MacroDesign:
    """Insert a register into the first failing fusion stage, balancing delay."""
    stages = [st for st in design.stages if ofu_only(st)]
    failing = [st for st in stages if design.stage_delay(st) > design.budget_ps] or stages
    target = next((st for st in failing if len(st) >= 2), None)
    if target is None:
        raise PipelineLimit("no fusion stage has two sub-stages to separate")
    if len(stages) + 1 > MAX_OFU_STAGES:
        raise PipelineLimit(f"fusion pipeline limited to {MAX_OFU_STAGES} stages")
    cut = _balanced_cut(design, target)
    d = replace(design, cuts=design.cuts | {cut})
    return d.logged("add_ofu_pipeline", after=cut)


def merge_registers(design: MacroDesign) -> MacroDesign:
    """Remove stage boundaries front to back while the merged stage meets timing."""
    d = design
    removed = []
    changed = True
    while changed:
        changed = False
        stages = d.stages
        for i in range(len(stages) - 1):
            a, b = stages[i], stages[i + 1]
            if "align" in a or "align" in b:
                continue
            if d.stage_delay(a) + d.stage_delay(b) <= d.budget_ps:
                cut = a[-1]
                d = replace(d, cuts=d.cuts - {cut})
                removed.append(cut)
                changed = True
                break
    if not removed:
        return design
    return d.logged("merge_registers", removed=tuple(removed))


def substitute(design: MacroDesign, kind: SubcircuitKind, topology_id: str, record: PpaRecord,
               stage: int = 0) -> MacroDesign:
    """Rebind one block to another library record (fine-tuning, faster adders)."""
    if kind == K.OutputFusion:
        d = design.with_ofu_record(stage, record)
        if stage == 1:
            d = d.with_binding(kind, topology_id, record)
    else:
        d = design.with_binding(kind, topology_id, record)
    params = dict(kind=kind.label, topology=topology_id, dims=record.dims, bin_ps=record.timing_bin_ps)
    if kind == K.OutputFusion:
        params["stage"] = stage
    return d.logged("substitute", **params)


TRANSFORMS = {
    "retime_adder": retime_adder,
    "split_column": split_column,
    "retime_ofu": retime_ofu,
    "add_ofu_pipeline": add_ofu_pipeline,
    "merge_registers": merge_registers,
}


def _find_record(design: MacroDesign, kind: SubcircuitKind, topology: str, dims: tuple, bin_ps: float):
    variant = design.library.variant(kind, topology)
    for r in design.library.resolve(variant, dims, design.spec.corner):
        if abs(r.timing_bin_ps - bin_ps) < 1e-6:
            return r
    raise TimingError(f"record {kind.label}/{topology} {dims} @{bin_ps} not found")


def replay(base: MacroDesign, log) -> MacroDesign:
    """Apply a transform log (entries or text lines) to a base design."""
    d = base
    for e in log:
        if isinstance(e, str):
            if not e.strip():
                continue
            e = LogEntry.parse(e)
        if e.name in TRANSFORMS:
            d = TRANSFORMS[e.name](d)
        elif e.name == "substitute":
            kind = SubcircuitKind.from_label(e.get("kind"))
            dims = tuple(int(x) for x in e.get("dims").split(":"))
            rec = _find_record(d, kind, e.get("topology"), dims, float(e.get("bin_ps")))
            d = substitute(d, kind, e.get("topology"), rec, int(e.get("stage", 0)))
        else:
            raise TimingError(f"unknown transform {e.name!r}")
    return d


# -- persistence --------------------------------------------------------------------------------


def _rec_dict(r: PpaRecord) -> dict:
    return {"dims": list(r.dims), "bin_ps": r.timing_bin_ps}


def design_to_dict(design: MacroDesign) -> dict:
    """JSON-ready description from which :func:`design_from_dict` rebuilds the design."""
    return {
        "bindings": [{"kind": b.kind.label, "topology": b.topology_id, **_rec_dict(b.record)} for b in design.bindings],
        "ofu_records": [_rec_dict(r) for r in design.ofu_records],
        "split": design.split,
        "cuts": sorted(design.cuts),
        "log": [e.line() for e in design.log],
    }


def design_from_dict(data: dict, spec: MacroSpec, library: Library) -> MacroDesign:
    probe = MacroDesign(spec, library)
    bindings = []
    for b in data["bindings"]:
        kind = SubcircuitKind.from_label(b["kind"])
        rec = _find_record(probe, kind, b["topology"], tuple(b["dims"]), float(b["bin_ps"]))
        bindings.append(Binding(kind, b["topology"], rec))
    ofu_topo = next((b["topology"] for b in data["bindings"] if b["kind"] == K.OutputFusion.label), None)
    ofu = tuple(_find_record(probe, K.OutputFusion, ofu_topo, tuple(r["dims"]), float(r["bin_ps"]))
                for r in data["ofu_records"])
    log = tuple(LogEntry.parse(line) for line in data.get("log", ()))
    return MacroDesign(spec, library, tuple(bindings), ofu, int(data["split"]), frozenset(data["cuts"]), log)
