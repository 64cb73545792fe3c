"""Search, emit and co-simulate a design, then show that a one-gate mutation is caught."""

import argparse
import random
import shutil
from pathlib import Path

from syndcim.cli import cmd_emit, cmd_search, cmd_verify

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", default=str(ROOT / "configs" / "macro_16x16.toml"))
    ap.add_argument("--design", default="d000")
    ap.add_argument("--vectors", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/verify")
    args = ap.parse_args()
    out = Path(args.out)

    for step in (lambda: cmd_search(args.spec, out), lambda: cmd_emit(out, args.design),
                 lambda: cmd_verify(out, args.design, args.vectors, args.seed)):
        code = step()
        if code:
            raise SystemExit(code)

    mutant = out.with_name(out.name + "_mutant")
    shutil.rmtree(mutant, ignore_errors=True)
    shutil.copytree(out, mutant)
    hdl = mutant / "hdl" / f"{args.design}_macro.v"
    lines = hdl.read_text().splitlines()
    cands = [i for i, line in enumerate(lines) if line.startswith(("  and g_", "  nor g_", "  xor g_"))]
    i = random.Random(args.seed).choice(cands)
    old = lines[i].split()[0]
    new = {"and": "or", "nor": "nand", "xor": "and"}[old]
    lines[i] = lines[i].replace(f"  {old} ", f"  {new} ", 1)
    hdl.write_text("\n".join(lines) + "\n")
    print(f"\nmutated line {i + 1}: {old} -> {new}")
    code = cmd_verify(mutant, args.design, args.vectors, args.seed)
    print(f"verify on mutant exited with {code}")


if __name__ == "__main__":
    main()
