"""Energy-efficiency trend over array size and the FP/INT power overhead at 64x64."""

import argparse
from pathlib import Path

from syndcim.library import load_library, reference_library_path
from syndcim.ppa import evaluate, sweep_dimensions, trend_csv
from syndcim.search import search
from syndcim.spec_model import BF16, FP8, INT4, INT8, MacroSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="32,64,128,256")
    ap.add_argument("--freq", type=float, default=800e6, help="MAC frequency in Hz")
    ap.add_argument("--mcr", type=int, default=2)
    ap.add_argument("--library", default=None)
    ap.add_argument("--out", default="results/trends")
    args = ap.parse_args()
    lib = load_library(args.library or reference_library_path())
    dims = [int(d) for d in args.dims.split(",")]

    rows = sweep_dimensions(MacroSpec(64, 64, args.mcr, (INT4, INT8), args.freq, args.freq), dims, lib)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trend.csv").write_text(trend_csv(rows))
    print("dim  precision  TOPS/W   fJ/MAC")
    for r in rows:
        print(f"{r['dim']:4d}  {r['precision']:9}  {r['tops_per_w']:6.1f}  {r['energy_fj_per_mac']:7.2f}")

    spec = MacroSpec(64, 64, args.mcr, (INT4, INT8, FP8, BF16), args.freq, args.freq)
    print("\n64x64 power overhead of FP modes")
    for p in search(spec, lib).frontier:
        q = {x.name: evaluate(p.design, x).power_mw for x in spec.precisions}
        print(f"{p.design_id}: FP8/INT4 {q['FP8'] / q['INT4']:.3f}  BF16/INT8 {q['BF16'] / q['INT8']:.3f}")


if __name__ == "__main__":
    main()
