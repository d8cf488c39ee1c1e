"""Reference experiment end to end: data, combined inversion, figures.

    python3 scripts/run_reference.py --out out/reference
"""

import argparse
import sys
from pathlib import Path

from ttlogistic.cli import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "reference")
    ap.add_argument("--spec", type=Path, default=ROOT / "specs" / "reference.json")
    ap.add_argument("--method", choices=("tt", "grad", "combined"), default="combined")
    args = ap.parse_args()

    common = ["--spec", str(args.spec), "--out", str(args.out)]
    for argv in (["invert", "--method", args.method] + common, ["plot"] + common):
        code = run(argv)
        if code != 0:
            sys.exit(code)


if __name__ == "__main__":
    main()
