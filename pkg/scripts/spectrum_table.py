"""Extreme eigenvalues and condition numbers of A = S + nu M versus N.

python3 scripts/spectrum_table.py [--nu 1.0] [--csv out.csv]
"""

import argparse
import csv
import sys

from lgnet.evaluation import spectrum_report
from lgnet.galerkin import assemble, make_basis

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--N", type=int, nargs="+", default=[8, 16, 32, 64, 128, 256])
    ap.add_argument("--csv")
    a = ap.parse_args()

    rows = []
    for bc in ("dirichlet", "neumann"):
        for N in a.N:
            r = spectrum_report(assemble(make_basis(N, bc), a.nu))
            rows.append({"bc": bc, "N": N, **r})

    print(f"{'bc':<10} {'N':>5} {'rho_min':>12} {'rho_max':>12} {'cond':>12}")
    for r in rows:
        print(f"{r['bc']:<10} {r['N']:>5} {r['rho_min']:>12.4e} {r['rho_max']:>12.4e} {r['condition_number']:>12.4e}")
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    sys.exit(0)
