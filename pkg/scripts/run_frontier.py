"""Search one spec, print the frontier with its spread, and write a scatter plot."""

import argparse
import csv
from pathlib import Path

from syndcim.cli import cmd_report, cmd_search

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", default=str(ROOT / "configs" / "macro_64x64.toml"))
    ap.add_argument("--library", default=None)
    ap.add_argument("--out", default="results/frontier")
    args = ap.parse_args()

    code = cmd_search(args.spec, args.out, args.library)
    if code:
        raise SystemExit(code)
    cmd_report(args.out, "svg")

    with open(Path(args.out) / "frontier.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("power_mw", "area_um2", "tops_per_w", "tops_per_mm2"):
            r[k] = float(r[k])
        r["latency_cycles"] = int(r["latency_cycles"])
    print(f"{'id':5} {'adder':10} {'power mW':>9} {'area um2':>10} {'stages':>6} {'TOPS/W':>8} {'TOPS/mm2':>9}")
    for r in rows:
        print(f"{r['design_id']:5} {r['adder_topology']:10} {r['power_mw']:9.3f} {r['area_um2']:10.0f} "
              f"{r['latency_cycles']:6d} {r['tops_per_w']:8.1f} {r['tops_per_mm2']:9.1f}")
    p = [r["power_mw"] for r in rows]
    a = [r["area_um2"] for r in rows]
    print(f"power spread {max(p) / min(p) - 1:.1%}, area spread {max(a) / min(a) - 1:.1%}")


if __name__ == "__main__":
    main()
