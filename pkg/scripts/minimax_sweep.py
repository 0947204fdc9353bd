"""Sweep M in the minimax construction and write the F2 gap table as CSV."""

import argparse
import csv
import sys

from coherence_proj.harness import minimax_counterexample
from coherence_proj.models import format_float


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--M", type=float, nargs="+", default=[1.5, 2, 3, 4, 5, 6, 8, 10, 20, 50, 100])
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = p.parse_args(argv)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(["M", "gap", "gap_formula", "violation"])
    for M in args.M:
        r = minimax_counterexample(M)
        w.writerow([format_float(M), format_float(r.margin), format_float(r.detail["gap_formula"]), r.found])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
