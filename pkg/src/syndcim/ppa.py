"""Macro-level power, area and throughput metrics of a bound design."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .library import SubcircuitKind
from .spec_model import ActivityProfile, PrecisionFormat
from .timing import MacroDesign, fmax_hz

K = SubcircuitKind

TREND_HEADER = ["dim", "precision", "energy_fj_per_mac", "tops", "tops_per_w", "area_um2", "tops_per_mm2_1b1b"]


class UnsupportedPrecision(ValueError):
    pass


@dataclass(frozen=True)
class PpaSummary:
    precision: str
    frequency_hz: float
    fmax_hz: float
    cycles_per_op: int
    macs_per_op: float
    power_mw: float
    dynamic_mw: float
    leakage_mw: float
    area_um2: float
    energy_fj_per_op: float
    energy_fj_per_mac: float
    tops: float
    tops_1b1b: float
    tops_per_w: float
    tops_per_mm2_1b1b: float
    breakdown: dict = field(default_factory=dict, compare=False)


def pipeline_register_bits(design: MacroDesign) -> int:
    """Datapath register bits: input serializers plus MAC-to-S&A boundary registers."""
    spec = design.spec
    bits = spec.height * spec.max_input_bits
    if "csa" in design.cuts:
        row_bits = sum(len(r) for r in design.adder_tree.rows)
        bits += spec.width * design.split * row_bits
    if "rca" in design.cuts:
        bits += spec.width * design.out_width
    return bits


def _align_energy(design: MacroDesign, fmt: PrecisionFormat) -> float:
    """Alignment energy for ``fmt`` (narrower exponents gate the unused comparator bits)."""
    b = design.binding(K.FpIntAlign)
    rec = b.record
    if fmt.exponent_bits == rec.dims[1]:
        return rec.energy_fj
    variant = design.library.variant(K.FpIntAlign, b.topology_id)
    at = design.library.resolve(variant, (rec.dims[0], fmt.exponent_bits), design.spec.corner)
    full = design.library.resolve(variant, rec.dims, design.spec.corner)
    if not at or not full:
        return rec.energy_fj
    ratio = min(r.energy_fj for r in at) / min(r.energy_fj for r in full)
    return rec.energy_fj * ratio


def evaluate(design: MacroDesign, precision, activity: ActivityProfile | None = None,
             frequency_hz: float | None = None) -> PpaSummary:
    spec = design.spec
    fmt = precision
    if isinstance(precision, str):
        fmt = next((p for p in spec.precisions if p.name == precision.upper()), None)
    if fmt is None or fmt not in spec.precisions:
        raise UnsupportedPrecision(f"{precision} is not among the spec precisions")
    act = activity or spec.activity
    f = frequency_hz or spec.mac_frequency_hz
    H, W = spec.height, spec.width
    lib = design.library
    cells = design.cells
    t = act.input_toggle_rate
    spf = (1 - act.input_sparsity) * (1 - act.weight_sparsity * lib.sparsity_k)
    n_in = fmt.input_bits
    wb = fmt.weight_bits
    n_fuse = (wb - 1).bit_length()

    per_cycle = {
        "wl_driver": design.record(K.WlDriver).energy_fj * t,
        "memory_cell": design.record(K.MemoryCell).energy_fj * t,
        "multiplier_mux": design.record(K.MultiplierMux).energy_fj * t * spf,
        "adder_tree": W * design.split * design.record(K.AdderTree).energy_fj * t * spf,
        "shift_add": design.record(K.ShiftAdd).energy_fj * t,
        "registers": pipeline_register_bits(design) * cells["DFF"].energy_fj,
    }
    if design.merge_tree is not None:
        per_cycle["merge"] = W * design.merge_tree.energy(cells) * t * spf
    breakdown = {k: v * n_in for k, v in per_cycle.items()}
    breakdown["output_fusion"] = sum(r.energy_fj for r in design.ofu_records[:n_fuse]) * t
    if fmt.is_float:
        breakdown["fp_int_align"] = _align_energy(design, fmt)
    e_op = sum(breakdown.values())

    area = (
        sum(design.record(k).area_um2 for k in (K.WlDriver, K.BlDriver, K.MemoryCell, K.MultiplierMux, K.ShiftAdd))
        + W * design.split * design.record(K.AdderTree).area_um2
        + sum(r.area_um2 for r in design.ofu_records)
        + pipeline_register_bits(design) * cells["DFF"].area_um2
    )
    leak = (
        sum(design.record(k).leakage_uw for k in (K.WlDriver, K.BlDriver, K.MemoryCell, K.MultiplierMux, K.ShiftAdd))
        + W * design.split * design.record(K.AdderTree).leakage_uw
        + sum(r.leakage_uw for r in design.ofu_records)
        + pipeline_register_bits(design) * cells["DFF"].leakage_uw
    )
    if design.merge_tree is not None:
        area += W * design.merge_tree.area(cells)
        leak += W * sum(cells[c.kind].leakage_uw for c in design.merge_tree.all_cells())
    if fmt.is_float:
        area += design.record(K.FpIntAlign).area_um2
        leak += design.record(K.FpIntAlign).leakage_uw

    dynamic_mw = e_op / n_in * f * 1e-12
    leakage_mw = leak / 1000.0
    power = dynamic_mw + leakage_mw
    macs = H * W / wb
    tops = 2 * macs * f / n_in / 1e12
    tops_1b1b = tops * n_in * wb
    return PpaSummary(
        precision=fmt.name,
        frequency_hz=f,
        fmax_hz=fmax_hz(design),
        cycles_per_op=n_in,
        macs_per_op=macs,
        power_mw=power,
        dynamic_mw=dynamic_mw,
        leakage_mw=leakage_mw,
        area_um2=area,
        energy_fj_per_op=e_op,
        energy_fj_per_mac=e_op / macs,
        tops=tops,
        tops_1b1b=tops_1b1b,
        tops_per_w=tops / (power / 1000.0),
        tops_per_mm2_1b1b=tops_1b1b / (area / 1e6),
        breakdown=breakdown,
    )


def objectives(design: MacroDesign) -> tuple:
    """(power_mw, area_um2, latency_cycles); power and area are worst over the spec precisions."""
    sums = [evaluate(design, p) for p in design.spec.precisions]
    return (max(s.power_mw for s in sums), max(s.area_um2 for s in sums), design.latency_cycles)


def sweep_dimensions(spec_template, dims, library, precisions=None) -> list:
    """Best-energy frontier design per square dimension and precision."""
    from .search import search

    rows = []
    for d in dims:
        try:
            spec = spec_template.replace(height=int(d), width=int(d))
        except Exception as e:
            raise ValueError(f"dimension {d} is not valid for this spec: {e}") from e
        frontier = search(spec, library).frontier
        for p in precisions or spec.precisions:
            best = max((evaluate(pt.design, p) for pt in frontier), key=lambda s: (s.tops_per_w, -s.area_um2))
            rows.append({
                "dim": int(d),
                "precision": best.precision,
                "energy_fj_per_mac": best.energy_fj_per_mac,
                "tops": best.tops,
                "tops_per_w": best.tops_per_w,
                "area_um2": best.area_um2,
                "tops_per_mm2_1b1b": best.tops_per_mm2_1b1b,
            })
    return rows


def trend_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TREND_HEADER)
    for r in rows:
        w.writerow([r["dim"], r["precision"]] + [f"{r[k]:.6g}" for k in TREND_HEADER[2:]])
    return buf.getvalue()
