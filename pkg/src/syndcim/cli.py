"""Command-line driver.

Output directory layout::

    <out>/spec.toml              normalized copy of the input spec
    <out>/frontier.csv           one row per Pareto point
    <out>/designs/<id>.json      reconstructable design description
    <out>/logs/<id>.log          transformation log
    <out>/hdl/<id>_*.v|json      emitted macro, testbench, parameters
    <out>/manifest.json          provenance and artifact hashes

Exit codes: 0 success, 1 bad input, 2 empty frontier, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, rtl
from .library import LibraryError, library_hash, load_library, reference_library_path
from .netlist import NetlistError, parse_verilog
from .ppa import sweep_dimensions, trend_csv
from .search import EmptyFrontier, frontier_csv, search, select
from .spec_model import SpecError, load_spec, parse_spec, serialize_spec, validate_compatibility
from .timing import TimingError, design_from_dict, design_to_dict

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_MISMATCH = 0, 1, 2, 3


class CliError(Exception):
    """Input problem reported with exit code 1."""


class UnknownDesignId(CliError):
    pass


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    spec_sha256: str
    library_sha256: str
    library_path: str
    artifacts: dict = field(default_factory=dict)
    selected: str | None = None
    # wall-clock data is kept in its own field so every other byte is reproducible
    timestamps: dict = field(default_factory=dict)

    def record(self, out: Path, path) -> None:
        p = Path(path)
        self.artifacts[p.relative_to(out).as_posix()] = _sha(p)

    def save(self, out: Path) -> Path:
        path = out / "manifest.json"
        data = asdict(self)
        data["artifacts"] = dict(sorted(self.artifacts.items()))
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, out: Path) -> "RunManifest":
        path = out / "manifest.json"
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return cls(**data)
        except FileNotFoundError:
            raise CliError(f"{path}: not found (run `syndcim search` first)") from None
        except (json.JSONDecodeError, TypeError) as e:
            raise CliError(f"{path}: unreadable manifest: {e}") from None


def _library_dir(arg) -> Path:
    return Path(arg) if arg else reference_library_path()


def _load_library(path: Path):
    try:
        return load_library(path)
    except LibraryError as e:
        raise CliError(f"{path}: {type(e).__name__}: {e}") from None
    except OSError as e:
        raise CliError(f"{path}: {e}") from None


def _load_spec(path) -> object:
    try:
        return load_spec(path)
    except OSError as e:
        raise CliError(f"{path}: {e.strerror or e}") from None
    except SpecError as e:
        raise CliError(f"{path}: {e}") from None


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


# -- commands ---------------------------------------------------------------------------------------


def cmd_search(spec_path, out_dir, library_path=None, auto: bool = False) -> int:
    out = Path(out_dir)
    t0 = time.time()
    spec = _load_spec(spec_path)
    lib_dir = _library_dir(library_path)
    library = _load_library(lib_dir)
    diags = validate_compatibility(spec, library)
    if diags:
        raise CliError(f"{spec_path}: incompatible with library {lib_dir}: " + "; ".join(map(str, diags)))
    try:
        result = search(spec, library)
    except EmptyFrontier as e:
        print(f"error: {e}", file=sys.stderr)
        print(json.dumps(e.nearest_miss, sort_keys=True), file=sys.stderr)
        return EXIT_EMPTY

    out.mkdir(parents=True, exist_ok=True)
    spec_text = serialize_spec(spec)
    man = RunManifest(__version__, hashlib.sha256(spec_text.encode()).hexdigest(), library_hash(lib_dir),
                      str(lib_dir.resolve()))
    man.record(out, _write(out / "spec.toml", spec_text))
    man.record(out, _write(out / "frontier.csv", frontier_csv(result.frontier)))
    for p in result.frontier:
        doc = json.dumps(design_to_dict(p.design), indent=2, sort_keys=True) + "\n"
        man.record(out, _write(out / "designs" / f"{p.design_id}.json", doc))
        man.record(out, _write(out / "logs" / f"{p.design_id}.log", "".join(e.line() + "\n" for e in p.design.log)))
    t1 = time.time()
    man.timestamps = {"started": t0, "finished": t1}
    if auto:
        chosen = select(result.frontier, spec.preference)
        man.selected = next(p.design_id for p in result.frontier if p.design is chosen)
    man.save(out)
    print(f"{len(result.frontier)} frontier designs from {result.base_configs} base configurations "
          f"({len(result.abandoned)} abandoned) -> {out / 'frontier.csv'}")
    if auto:
        print(f"selected {man.selected}")
        return cmd_emit(out, man.selected)
    return EXIT_OK


def _design(out: Path, design_id: str | None, auto: bool = False):
    man = RunManifest.load(out)
    spec_path = out / "spec.toml"
    try:
        spec = parse_spec(spec_path.read_text(encoding="utf-8"))
    except (OSError, SpecError) as e:
        raise CliError(f"{spec_path}: {e}") from None
    lib_dir = Path(os.environ["SYNDCIM_LIBRARY"]) if os.environ.get("SYNDCIM_LIBRARY") else Path(man.library_path)
    library = _load_library(lib_dir)
    if library.source_hash != man.library_sha256:
        print(f"warning: library {lib_dir} differs from the one used for the search", file=sys.stderr)
    if auto and design_id is None:
        design_id = man.selected
        if design_id is None:
            points = [_design(out, i)[1] for i in _design_ids(out)]
            if not points:
                raise UnknownDesignId(f"{out}: no designs")
            from .search import ParetoPoint
            from .ppa import objectives

            pts = [ParetoPoint(d, objectives(d), i) for i, d in zip(_design_ids(out), points)]
            chosen = select(pts, spec.preference)
            design_id = next(p.design_id for p in pts if p.design is chosen)
    if design_id is None:
        raise CliError("either --design or --auto is required")
    path = out / "designs" / f"{design_id}.json"
    if not path.is_file():
        known = ", ".join(_design_ids(out)) or "none"
        raise UnknownDesignId(f"unknown design id {design_id!r} in {out} (known: {known})")
    try:
        design = design_from_dict(json.loads(path.read_text(encoding="utf-8")), spec, library)
    except (KeyError, ValueError, TimingError, LibraryError) as e:
        raise CliError(f"{path}: cannot rebuild design: {e}") from None
    return design_id, design, man


def _design_ids(out: Path) -> list:
    return sorted(p.stem for p in (out / "designs").glob("*.json"))


def cmd_emit(out_dir, design_id=None, auto: bool = False, vectors: int = 10, seed: int = 0) -> int:
    out = Path(out_dir)
    design_id, design, man = _design(out, design_id, auto)
    paths = rtl.write_artifacts(design, out / "hdl", design_id, n_vectors=vectors, seed=seed)
    for p in paths.values():
        man.record(out, p)
    man.save(out)
    print(f"emitted {design_id}: " + ", ".join(sorted(paths.values())))
    return EXIT_OK


def cmd_verify(out_dir, design_id, vectors: int = 1000, seed: int = 0) -> int:
    out = Path(out_dir)
    design_id, design, _ = _design(out, design_id)
    hdl = out / "hdl" / f"{rtl.module_name(design_id)}.v"
    if not hdl.is_file():
        cmd_emit(out, design_id)
    try:
        netlist = parse_verilog(hdl.read_text(encoding="utf-8"), top=rtl.module_name(design_id))
    except NetlistError as e:
        raise CliError(f"{hdl}: {e}") from None
    report = rtl.cosimulate(design, netlist, vectors=vectors, seed=seed)
    lines = [f"design {design_id} vectors {vectors} seed {seed}", report.summary()]
    for name, (ok, n) in sorted(report.per_precision.items()):
        lines.append(f"  {name}: {ok}/{n} pass")
    _write(out / "hdl" / f"{design_id}_verify.log", "\n".join(lines) + "\n")
    print("\n".join(lines))
    if not report.passed:
        print(f"counterexample: {json.dumps(report.counterexample, sort_keys=True, default=str)}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _dims(text: str) -> list:
    try:
        dims = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"--dims: expected a comma-separated list of integers, got {text!r}") from None
    if not dims:
        raise CliError("--dims: empty list")
    return dims


def cmd_sweep(spec_path, dims, out_dir, library_path=None) -> int:
    spec = _load_spec(spec_path)
    library = _load_library(_library_dir(library_path))
    if isinstance(dims, str):
        dims = _dims(dims)
    try:
        rows = sweep_dimensions(spec, dims, library)
    except ValueError as e:
        raise CliError(f"{spec_path}: {e}") from None
    except EmptyFrontier as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    path = _write(Path(out_dir) / "trend.csv", trend_csv(rows))
    print(f"{len(rows)} rows -> {path}")
    return EXIT_OK


def _frontier(out: Path) -> list:
    path = out / "frontier.csv"
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise CliError(f"{path}: not found (run `syndcim search` first)") from None


def scatter_svg(rows, x_key: str, y_key: str, x_label: str, y_label: str, size=(480, 360)) -> str:
    """Minimal standalone SVG scatter plot with one labelled circle per row."""
    W, H = size
    ml, mr, mt, mb = 70, 20, 20, 50
    xs = [float(r[x_key]) for r in rows]
    ys = [float(r[y_key]) for r in rows]

    def span(v):
        lo, hi = (min(v), max(v)) if v else (0.0, 1.0)
        pad = (hi - lo) * 0.1 or abs(hi) * 0.1 or 1.0
        return lo - pad, hi + pad

    (x0, x1), (y0, y1) = span(xs), span(ys)

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

    def py(y):
        return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.1f}" y="{H - mb + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{ml - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{(ml + W - mr) / 2:.1f}" y="{H - 10}" text-anchor="middle">{x_label}</text>')
    out.append(f'<text transform="translate(15,{(mt + H - mb) / 2:.1f}) rotate(-90)" text-anchor="middle">{y_label}</text>')
    for r, x, y in zip(rows, xs, ys):
        out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="4" fill="steelblue">'
                   f'<title>{r.get("design_id", "")}</title></circle>')
        out.append(f'<text x="{px(x) + 6:.1f}" y="{py(y) - 6:.1f}">{r.get("design_id", "")}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(out_dir, fmt: str = "csv") -> int:
    out = Path(out_dir)
    rows = _frontier(out)
    if fmt == "csv":
        keys = ["design_id", "adder_topology", "power_mw", "area_um2", "latency_cycles", "tops_per_w", "tops_per_mm2"]
        lines = [",".join(keys)] + [",".join(r[k] for k in keys) for r in rows]
        path = _write(out / "report.csv", "\n".join(lines) + "\n")
    elif fmt == "svg":
        path = _write(out / "report.svg", scatter_svg(rows, "tops_per_mm2", "tops_per_w",
                                                       "TOPS/mm2 (1b x 1b)", "TOPS/W"))
    else:
        raise CliError(f"--format: unsupported format {fmt!r}")
    print(f"report -> {path}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="syndcim", description="Digital computing-in-memory macro compiler")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    lib_help = "library directory (default: $SYNDCIM_LIBRARY or the bundled reference library)"
    s = sub.add_parser("search", help="search the design space and write the Pareto frontier")
    s.add_argument("--spec", required=True)
    s.add_argument("--library", help=lib_help)
    s.add_argument("--out", required=True)
    s.add_argument("--auto", action="store_true", help="pick one design by the spec preference and emit it")

    e = sub.add_parser("emit", help="write Verilog, testbench and parameters for a frontier design")
    e.add_argument("--out", required=True)
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--design")
    g.add_argument("--auto", action="store_true")
    e.add_argument("--vectors", type=int, default=10, help="testbench vectors")
    e.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="co-simulate emitted HDL against the golden model")
    v.add_argument("--out", required=True)
    v.add_argument("--design", required=True)
    v.add_argument("--vectors", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)

    w = sub.add_parser("sweep", help="best-efficiency trend over square array sizes")
    w.add_argument("--spec", required=True)
    w.add_argument("--dims", required=True, help="comma-separated sizes, e.g. 32,64,128")
    w.add_argument("--library", help=lib_help)
    w.add_argument("--out", required=True)

    r = sub.add_parser("report", help="summarize a search directory")
    r.add_argument("--out", required=True)
    r.add_argument("--format", choices=["csv", "svg"], default="csv")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "search":
            return cmd_search(args.spec, args.out, args.library, args.auto)
        if args.command == "emit":
            return cmd_emit(args.out, args.design, args.auto, args.vectors, args.seed)
        if args.command == "verify":
            return cmd_verify(args.out, args.design, args.vectors, args.seed)
        if args.command == "sweep":
            return cmd_sweep(args.spec, args.dims, args.out, args.library)
        return cmd_report(args.out, args.format)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
