"""Subcircuit library: topology variants, PPA lookup tables, cell models.

On disk a library is a directory holding ``manifest.toml`` plus one CSV file
``<kind>.lut`` per subcircuit kind with the header::

    topology_id,dim_key,timing_bin_ps,corner,delay_ps,energy_fj,leakage_uw,area_um2

``dim_key`` is a colon-joined integer tuple whose meaning depends on the kind
(see ``DIM_NAMES``).
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

LUT_HEADER = ["topology_id", "dim_key", "timing_bin_ps", "corner", "delay_ps", "energy_fj", "leakage_uw", "area_um2"]


class LibraryError(Exception):
    pass


class MissingKind(LibraryError):
    pass


class DuplicateKey(LibraryError):
    pass


class NegativeValue(LibraryError):
    pass


class ManifestSyntax(LibraryError):
    pass


class UnknownTopology(LibraryError):
    pass


class OutOfRange(LibraryError):
    pass


class Incompatible(LibraryError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class SubcircuitKind(Enum):
    FpIntAlign = "fp_int_align"
    WlDriver = "wl_driver"
    BlDriver = "bl_driver"
    MemoryCell = "memory_cell"
    MultiplierMux = "multiplier_mux"
    AdderTree = "adder_tree"
    ShiftAdd = "shift_add"
    OutputFusion = "output_fusion"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "SubcircuitKind":
        for k in cls:
            if k.value == label or k.name == label:
                return k
        raise ManifestSyntax(f"unknown subcircuit kind {label!r}")


DIM_NAMES = {
    SubcircuitKind.FpIntAlign: ("height", "exponent_bits"),
    SubcircuitKind.WlDriver: ("height", "width"),
    SubcircuitKind.BlDriver: ("rows", "width"),
    SubcircuitKind.MemoryCell: ("height", "width", "mcr"),
    SubcircuitKind.MultiplierMux: ("height", "width", "mcr"),
    SubcircuitKind.AdderTree: ("operands", "width"),
    SubcircuitKind.ShiftAdd: ("acc_width", "width"),
    SubcircuitKind.OutputFusion: ("in_width", "groups"),
}

KNOWN_TOPOLOGIES = {
    SubcircuitKind.FpIntAlign: {"cmp_tree_e4", "cmp_tree_e8"},
    SubcircuitKind.WlDriver: {"inv_chain"},
    SubcircuitKind.BlDriver: {"tg_writer"},
    SubcircuitKind.MemoryCell: {"6t2t", "8t_dlatch", "12t_oai"},
    SubcircuitKind.MultiplierMux: {"1t_pass", "oai22_fused", "tg2t_nor"},
    SubcircuitKind.AdderTree: {"signed_rca", "cmp42_csa", "mixed_csa"},
    SubcircuitKind.ShiftAdd: {"rca_acc"},
    SubcircuitKind.OutputFusion: {"rca_fuse"},
}


def parse_dim_key(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(":"))
    except ValueError:
        raise ManifestSyntax(f"bad dim_key {text!r}") from None
    if not dims or any(d <= 0 for d in dims):
        raise ManifestSyntax(f"bad dim_key {text!r}")
    return dims


def format_dim_key(dims) -> str:
    return ":".join(str(int(d)) for d in dims)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- timing-constraint ladder -------------------------------------------------


@dataclass(frozen=True)
class BinLadder:
    start_ps: float = 100.0
    ratio: float = 1.25
    stop_ps: float = 4000.0

    def bin(self, k: int) -> float:
        return round(self.start_ps * self.ratio**k, 3)

    def bins(self) -> list[float]:
        out, k = [], 0
        while self.bin(k) <= self.stop_ps:
            out.append(self.bin(k))
            k += 1
        return out

    def snap(self, delay_ps: float) -> float:
        """Smallest ladder bin >= delay (the ladder continues past ``stop_ps``)."""
        k = 0
        if delay_ps > self.start_ps:
            k = max(0, int(math.floor(math.log(delay_ps / self.start_ps, self.ratio))) - 1)
        while self.bin(k) < delay_ps:
            k += 1
        return self.bin(k)


# -- cells --------------------------------------------------------------------


@dataclass(frozen=True)
class CellModel:
    """Timing/energy/area of one primitive; delays are per (input, output) port pair in ps."""

    name: str
    energy_fj: float
    area_um2: float
    leakage_uw: float
    port_delays: dict = field(default_factory=dict, hash=False, compare=True)

    def delay(self, inp: str, out: str) -> float | None:
        return self.port_delays.get(inp, {}).get(out)

    @property
    def worst_delay(self) -> float:
        return max((d for outs in self.port_delays.values() for d in outs.values()), default=0.0)

    def outputs(self) -> list[str]:
        seen = []
        for outs in self.port_delays.values():
            for o in outs:
                if o not in seen:
                    seen.append(o)
        return seen

    def scaled(self, delay_scale: float, energy_scale: float, leakage_scale: float) -> "CellModel":
        return CellModel(
            self.name,
            self.energy_fj * energy_scale,
            self.area_um2,
            self.leakage_uw * leakage_scale,
            {i: {o: d * delay_scale for o, d in outs.items()} for i, outs in self.port_delays.items()},
        )


@dataclass(frozen=True)
class Corner:
    name: str
    delay_scale: float = 1.0
    energy_scale: float = 1.0
    leakage_scale: float = 1.0


# -- records / variants -------------------------------------------------------


@dataclass(frozen=True, order=True)
class PpaRecord:
    dims: tuple[int, ...]
    timing_bin_ps: float
    corner: str
    delay_ps: float
    energy_fj: float
    leakage_uw: float
    area_um2: float

    @property
    def key(self) -> tuple:
        return (self.dims, self.timing_bin_ps, self.corner)

    def check(self, where: str = "") -> None:
        for name in ("timing_bin_ps", "delay_ps", "energy_fj", "leakage_uw", "area_um2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise NegativeValue(f"{where}{name}={v}")
        if self.delay_ps > self.timing_bin_ps * (1 + 1e-12):
            raise ManifestSyntax(f"{where}delay {self.delay_ps} exceeds its timing bin {self.timing_bin_ps}")


@dataclass(frozen=True)
class ScalingRule:
    """Power-law energy/area/leakage exponents per dimension, log-step delay rule."""

    energy: tuple[float, ...]
    area: tuple[float, ...]
    leakage: tuple[float, ...]
    delay_log_dims: tuple[int, ...] = ()
    delay_log_step_ps: float = 0.0


def scale_ppa(record: PpaRecord, from_dims, to_dims, rule: ScalingRule, delay_scale: float = 1.0) -> PpaRecord:
    """Estimate a record at ``to_dims`` from one characterized at ``from_dims``.

    Energy, area and leakage follow ``(to/from) ** exponent`` per dimension;
    delay gains ``step * log2(to/from)`` for each dimension in the log rule
    (``delay_scale`` converts the nominal step to the record's corner).
    """
    from_dims, to_dims = tuple(from_dims), tuple(to_dims)
    if len(from_dims) != len(to_dims) or any(d <= 0 for d in to_dims) or any(d <= 0 for d in from_dims):
        raise OutOfRange(f"cannot scale {from_dims} -> {to_dims}")
    if from_dims == to_dims:
        return record

    def factor(exps):
        f = 1.0
        for a, b, e in zip(from_dims, to_dims, exps):
            f *= (b / a) ** e
        return f

    delay = record.delay_ps + delay_scale * rule.delay_log_step_ps * sum(
        math.log2(to_dims[i] / from_dims[i]) for i in rule.delay_log_dims
    )
    if delay < 0:
        raise OutOfRange(f"scaled delay negative for {from_dims} -> {to_dims}")
    out = replace(
        record,
        dims=to_dims,
        delay_ps=delay,
        energy_fj=record.energy_fj * factor(rule.energy),
        area_um2=record.area_um2 * factor(rule.area),
        leakage_uw=record.leakage_uw * factor(rule.leakage),
    )
    if out.delay_ps > out.timing_bin_ps:
        out = replace(out, timing_bin_ps=BinLadder().snap(out.delay_ps))
    return out


@dataclass(frozen=True)
class SubcircuitVariant:
    kind: SubcircuitKind
    topology_id: str
    mcr_range: tuple[int, int] = (1, 1 << 30)
    dim_min: tuple[int, ...] = ()
    dim_max: tuple[int, ...] = ()
    precision_kinds: frozenset = frozenset({"integer", "floating"})
    max_exponent_bits: int = 0
    records: tuple[PpaRecord, ...] = ()

    def applicable(self, dims=None, mcr=None, precision_kinds=None, exponent_bits=None) -> bool:
        if mcr is not None and not self.mcr_range[0] <= mcr <= self.mcr_range[1]:
            return False
        if dims is not None:
            if self.dim_min and any(d < lo for d, lo in zip(dims, self.dim_min)):
                return False
            if self.dim_max and any(d > hi for d, hi in zip(dims, self.dim_max)):
                return False
        if precision_kinds is not None and not set(precision_kinds) <= self.precision_kinds:
            return False
        if exponent_bits is not None and exponent_bits > self.max_exponent_bits:
            return False
        return True

    def has_corner(self, corner: str) -> bool:
        return any(r.corner == corner for r in self.records)

    def records_at(self, dims, corner: str) -> list[PpaRecord]:
        dims = tuple(dims)
        return [r for r in self.records if r.dims == dims and r.corner == corner]

    def nearest_dims(self, dims, corner: str):
        cands = sorted({r.dims for r in self.records if r.corner == corner and len(r.dims) == len(dims)})
        if not cands:
            return None
        return min(cands, key=lambda c: (sum(abs(math.log2(a / b)) for a, b in zip(c, dims)), c))


@dataclass(frozen=True)
class Library:
    name: str
    corners: dict
    cells: dict
    variants: tuple[SubcircuitVariant, ...]
    scaling: dict
    ladder: BinLadder = BinLadder()
    sparsity_k: float = 1.0
    leakage_per_area_uw: float = 0.01
    source_hash: str = ""

    def variants_of(self, kind: SubcircuitKind) -> list[SubcircuitVariant]:
        return sorted((v for v in self.variants if v.kind == kind), key=lambda v: v.topology_id)

    def variant(self, kind: SubcircuitKind, topology_id: str) -> SubcircuitVariant:
        for v in self.variants:
            if v.kind == kind and v.topology_id == topology_id:
                return v
        raise KeyError(f"{kind.label}/{topology_id}")

    def corner(self, name: str) -> Corner:
        try:
            return self.corners[name]
        except KeyError:
            raise OutOfRange(f"unknown corner {name!r}") from None

    def cells_at(self, corner: str) -> dict:
        c = self.corner(corner)
        return {n: m.scaled(c.delay_scale, c.energy_scale, c.leakage_scale) for n, m in self.cells.items()}

    def scale(self, kind: SubcircuitKind, variant: SubcircuitVariant, record: PpaRecord, to_dims) -> PpaRecord:
        to_dims = tuple(to_dims)
        if not variant.applicable(dims=to_dims):
            raise OutOfRange(f"{kind.label}/{variant.topology_id} does not cover dims {to_dims}")
        c = self.corner(record.corner)
        return scale_ppa(record, record.dims, to_dims, self.scaling[kind], c.delay_scale)

    def resolve(self, variant: SubcircuitVariant, dims, corner: str) -> list[PpaRecord]:
        """Records of ``variant`` at ``dims``: exact LUT rows, else scaled from the nearest rows."""
        dims = tuple(dims)
        exact = variant.records_at(dims, corner)
        if exact:
            return exact
        near = variant.nearest_dims(dims, corner)
        if near is None or not variant.applicable(dims=dims):
            return []
        return [self.scale(variant.kind, variant, r, dims) for r in variant.records_at(near, corner)]


def query(library: Library, kind: SubcircuitKind, dims, mcr: int, timing_bound_ps: float, corner: str,
          precision_kinds=None, exponent_bits=None):
    """Applicable (variant, record) pairs with delay <= bound, fastest first."""
    dims = tuple(dims)
    out = []
    for v in library.variants_of(kind):
        if not v.applicable(dims=dims, mcr=mcr, precision_kinds=precision_kinds, exponent_bits=exponent_bits):
            continue
        for r in library.resolve(v, dims, corner):
            if r.delay_ps <= timing_bound_ps:
                out.append((v, r))
    out.sort(key=lambda vr: (vr[1].delay_ps, vr[0].topology_id, vr[1].key))
    return out


# -- loading / saving ---------------------------------------------------------


def _read_manifest(root: Path) -> dict:
    path = root / "manifest.toml"
    if not path.is_file():
        raise ManifestSyntax(f"{path}: missing manifest")
    try:
        return tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ManifestSyntax(f"{path}: {e}") from e


def _need(tbl, key, where):
    if not isinstance(tbl, dict) or key not in tbl:
        raise ManifestSyntax(f"{where}: missing {key!r}")
    return tbl[key]


def _parse_lut(path: Path, kind: SubcircuitKind) -> dict:
    rows: dict[str, list[PpaRecord]] = {}
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestSyntax(f"{path}: empty LUT") from None
        if [h.strip() for h in header] != LUT_HEADER:
            raise ManifestSyntax(f"{path}: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(LUT_HEADER):
                raise ManifestSyntax(f"{path}:{lineno}: expected {len(LUT_HEADER)} fields")
            topo = row[0].strip()
            if topo not in KNOWN_TOPOLOGIES[kind]:
                raise UnknownTopology(f"{path}:{lineno}: unknown topology {topo!r} for {kind.name}")
            try:
                rec = PpaRecord(
                    dims=parse_dim_key(row[1].strip()),
                    timing_bin_ps=float(row[2]),
                    corner=row[3].strip(),
                    delay_ps=float(row[4]),
                    energy_fj=float(row[5]),
                    leakage_uw=float(row[6]),
                    area_um2=float(row[7]),
                )
            except ValueError as e:
                raise ManifestSyntax(f"{path}:{lineno}: {e}") from e
            rec.check(f"{path}:{lineno}: ")
            k = (topo, rec.key)
            if k in seen:
                raise DuplicateKey(f"{path}:{lineno}: duplicate key {topo} {rec.key}")
            seen.add(k)
            rows.setdefault(topo, []).append(rec)
    return rows


def load_library(root) -> Library:
    root = Path(root)
    if not root.is_dir():
        raise ManifestSyntax(f"{root}: not a directory")
    m = _read_manifest(root)
    meta = m.get("library", {})
    try:
        corners = {
            name: Corner(name, float(c.get("delay_scale", 1.0)), float(c.get("energy_scale", 1.0)),
                         float(c.get("leakage_scale", 1.0)))
            for name, c in _need(m, "corners", "manifest").items()
        }
        units = m.get("units", {})
        tau = float(units.get("delay_ps", 1.0))
        eps = float(units.get("energy_fj", 1.0))
        alpha = float(units.get("area_um2", 1.0))
        cells = {}
        for name, c in _need(m, "cells", "manifest").items():
            delays = {i: {o: float(d) * tau for o, d in outs.items()} for i, outs in c.get("delay", {}).items()}
            cells[name] = CellModel(name, float(c["energy"]) * eps, float(c["area"]) * alpha,
                                    float(c.get("leakage", 0.0)), delays)
        scaling = {}
        for label, s in _need(m, "scaling", "manifest").items():
            kind = SubcircuitKind.from_label(label)
            n = len(DIM_NAMES[kind])
            rule = ScalingRule(
                energy=tuple(float(x) for x in s["energy"]),
                area=tuple(float(x) for x in s["area"]),
                leakage=tuple(float(x) for x in s.get("leakage", s["area"])),
                delay_log_dims=tuple(int(x) for x in s.get("delay_log_dims", ())),
                delay_log_step_ps=float(s.get("delay_log_step_ps", 0.0)),
            )
            if not (len(rule.energy) == len(rule.area) == len(rule.leakage) == n):
                raise ManifestSyntax(f"scaling.{label}: expected {n} exponents")
            scaling[kind] = rule
        lad = meta.get("timing_bins", {})
        ladder = BinLadder(float(lad.get("start_ps", 100.0)), float(lad.get("ratio", 1.25)),
                           float(lad.get("stop_ps", 4000.0)))
        vspecs = _need(m, "variants", "manifest")
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ManifestSyntax(f"manifest: {e!r}") from e

    for c in cells.values():
        if c.energy_fj < 0 or c.area_um2 < 0 or c.leakage_uw < 0 or any(
            d < 0 for outs in c.port_delays.values() for d in outs.values()
        ):
            raise NegativeValue(f"cell {c.name} has a negative value")

    variants = []
    for kind in SubcircuitKind:
        path = root / f"{kind.label}.lut"
        kspec = vspecs.get(kind.label)
        if not path.is_file() or not kspec:
            raise MissingKind(kind.name)
        if kind not in scaling:
            raise ManifestSyntax(f"scaling.{kind.label}: missing")
        rows = _parse_lut(path, kind)
        for topo, vs in sorted(kspec.items()):
            if topo not in KNOWN_TOPOLOGIES[kind]:
                raise UnknownTopology(f"variants.{kind.label}.{topo}")
            recs = rows.pop(topo, [])
            if not recs:
                raise ManifestSyntax(f"{kind.label}/{topo}: empty ppa table")
            try:
                variants.append(SubcircuitVariant(
                    kind=kind,
                    topology_id=topo,
                    mcr_range=tuple(int(x) for x in vs.get("mcr_range", [1, 1 << 30])),
                    dim_min=tuple(int(x) for x in vs.get("dim_min", ())),
                    dim_max=tuple(int(x) for x in vs.get("dim_max", ())),
                    precision_kinds=frozenset(vs.get("precision_kinds", ["integer", "floating"])),
                    max_exponent_bits=int(vs.get("max_exponent_bits", 0)),
                    records=tuple(recs),
                ))
            except (TypeError, ValueError) as e:
                raise ManifestSyntax(f"variants.{kind.label}.{topo}: {e}") from e
        if rows:
            raise ManifestSyntax(f"{kind.label}.lut: rows for undeclared variants {sorted(rows)}")
        if not any(v.kind == kind for v in variants):
            raise MissingKind(kind.name)

    return Library(
        name=str(meta.get("name", root.name)),
        corners=corners,
        cells=cells,
        variants=tuple(variants),
        scaling=scaling,
        ladder=ladder,
        sparsity_k=float(meta.get("sparsity_k", 1.0)),
        leakage_per_area_uw=float(meta.get("leakage_per_area_uw", 0.01)),
        source_hash=library_hash(root),
    )


def library_hash(root) -> str:
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.iterdir()):
        if p.is_file() and (p.name == "manifest.toml" or p.suffix == ".lut"):
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def manifest_document(library: Library, units=None) -> dict:
    """Manifest as a TOML-ready dict (cells written in physical units)."""
    doc = {
        "library": {
            "name": library.name,
            "sparsity_k": library.sparsity_k,
            "leakage_per_area_uw": library.leakage_per_area_uw,
            "timing_bins": {
                "start_ps": library.ladder.start_ps,
                "ratio": library.ladder.ratio,
                "stop_ps": library.ladder.stop_ps,
            },
        },
        "units": units or {"delay_ps": 1.0, "energy_fj": 1.0, "area_um2": 1.0},
        "corners": {
            c.name: {"delay_scale": c.delay_scale, "energy_scale": c.energy_scale, "leakage_scale": c.leakage_scale}
            for c in library.corners.values()
        },
        "cells": {},
        "scaling": {},
        "variants": {},
    }
    u = doc["units"]
    for name, c in sorted(library.cells.items()):
        doc["cells"][name] = {
            "energy": c.energy_fj / u["energy_fj"],
            "area": c.area_um2 / u["area_um2"],
            "leakage": c.leakage_uw,
            "delay": {i: {o: d / u["delay_ps"] for o, d in outs.items()} for i, outs in c.port_delays.items()},
        }
    for kind in SubcircuitKind:
        r = library.scaling[kind]
        doc["scaling"][kind.label] = {
            "dims": list(DIM_NAMES[kind]),
            "energy": list(r.energy),
            "area": list(r.area),
            "leakage": list(r.leakage),
            "delay_log_dims": list(r.delay_log_dims),
            "delay_log_step_ps": r.delay_log_step_ps,
        }
        doc["variants"][kind.label] = {}
        for v in library.variants_of(kind):
            vd = {
                "mcr_range": list(v.mcr_range),
                "precision_kinds": sorted(v.precision_kinds),
            }
            if v.dim_min:
                vd["dim_min"] = list(v.dim_min)
            if v.dim_max:
                vd["dim_max"] = list(v.dim_max)
            if v.max_exponent_bits:
                vd["max_exponent_bits"] = v.max_exponent_bits
            doc["variants"][kind.label][v.topology_id] = vd
    return doc


def lut_text(library: Library, kind: SubcircuitKind) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LUT_HEADER)
    for v in library.variants_of(kind):
        for r in sorted(v.records, key=lambda r: (r.corner, r.dims, r.timing_bin_ps)):
            w.writerow([v.topology_id, format_dim_key(r.dims), _fmt(r.timing_bin_ps), r.corner,
                        _fmt(r.delay_ps), _fmt(r.energy_fj), _fmt(r.leakage_uw), _fmt(r.area_um2)])
    return buf.getvalue()


def save_library(library: Library, root, units=None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.toml").write_text(tomli_w.dumps(manifest_document(library, units)), encoding="utf-8")
    for kind in SubcircuitKind:
        (root / f"{kind.label}.lut").write_text(lut_text(library, kind), encoding="utf-8")
    return root


def reference_library_path() -> Path:
    env = os.environ.get("SYNDCIM_LIBRARY")
    if env:
        return Path(env)
    return Path(__file__).parent / "data" / "reference_library"


def load_reference_library() -> Library:
    return load_library(Path(__file__).parent / "data" / "reference_library")


# -- spec binding -------------------------------------------------------------


def acc_width(height: int, input_bits: int) -> int:
    """S&A accumulator width: serial bits + tree output growth + sign and one guard bit."""
    return input_bits + (height - 1).bit_length() + 2


def ofu_stage_count(max_weight_bits: int) -> int:
    return max(0, (max_weight_bits - 1).bit_length())


def ofu_widths(acc_w: int, n_stages: int) -> list[int]:
    """Input width of each fusion sub-stage (index 0 is the accumulator width)."""
    widths = [acc_w]
    for s in range(1, n_stages + 1):
        widths.append(widths[-1] + (1 << (s - 1)) + 1)
    return widths


def kind_requirements(spec, kind: SubcircuitKind):
    """Applicability query a spec places on ``kind`` (None when the kind is unused)."""
    H, W, M = spec.height, spec.width, spec.mcr
    kinds = {"integer"}
    if kind == SubcircuitKind.FpIntAlign:
        if not spec.float_formats:
            return None
        return {"dims": (H, spec.max_exponent_bits), "mcr": M, "precision_kinds": {"floating"},
                "exponent_bits": spec.max_exponent_bits}
    aw = acc_width(H, spec.max_input_bits)
    dims = {
        SubcircuitKind.WlDriver: (H, W),
        SubcircuitKind.BlDriver: (H * M, W),
        SubcircuitKind.MemoryCell: (H, W, M),
        SubcircuitKind.MultiplierMux: (H, W, M),
        SubcircuitKind.AdderTree: (H, 1),
        SubcircuitKind.ShiftAdd: (aw, W),
        SubcircuitKind.OutputFusion: (aw, max(1, W // 2)),
    }[kind]
    if kind == SubcircuitKind.OutputFusion and ofu_stage_count(spec.max_weight_bits) == 0:
        return None
    return {"dims": dims, "mcr": M, "precision_kinds": kinds}


@dataclass(frozen=True)
class SearchSpace:
    spec: object
    axes: dict  # SubcircuitKind -> tuple of SubcircuitVariant
    tree_operands: int
    acc_width: int
    ofu_stages: int

    @property
    def size(self) -> int:
        n = 1
        for vs in self.axes.values():
            n *= len(vs)
        return n

    def configurations(self):
        """Cartesian product of variant choices, in a stable order."""
        import itertools

        kinds = [k for k in SubcircuitKind if k in self.axes]
        for combo in itertools.product(*(self.axes[k] for k in kinds)):
            yield dict(zip(kinds, combo))


def enumerate_configs(spec, library: Library) -> SearchSpace:
    from .spec_model import validate_compatibility

    diags = validate_compatibility(spec, library)
    if diags:
        raise Incompatible(diags)
    axes = {}
    for kind in SubcircuitKind:
        req = kind_requirements(spec, kind)
        if req is None:
            continue
        axes[kind] = tuple(v for v in library.variants_of(kind) if v.applicable(**req) and v.has_corner(spec.corner))
    return SearchSpace(
        spec=spec,
        axes=axes,
        tree_operands=spec.height,
        acc_width=acc_width(spec.height, spec.max_input_bits),
        ofu_stages=ofu_stage_count(spec.max_weight_bits),
    )
