"""Regenerate the shipped reference library from its parametric models."""

import argparse

from syndcim.reference import default_output_dir, write_reference_library


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(default_output_dir()), help="output directory")
    args = ap.parse_args()
    root = write_reference_library(args.out)
    print(f"wrote {root}")


if __name__ == "__main__":
    main()
