#!/usr/bin/env python3
"""Refinement study: how the discrete rearrangement gaps shrink with h.

Prints the table and writes CSV/JSON under results/refinement/.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from symmin import MinimizeOptions, RefinementProtocol, preset, refinement_study
from symmin.reportio import write_csv, write_json

OUT = os.path.join(os.path.dirname(__file__), "..", "results", "refinement")


def main():
    os.makedirs(OUT, exist_ok=True)
    model = preset("plaplace")
    protocol = RefinementProtocol(opts=MinimizeOptions(
        max_iters=30000, grad_tol=1e-5, symmetrize_every=0, seed=3))
    h_list = [3 / 8, 3 / 16, 3 / 32]
    table = refinement_study(model, h_list, protocol)
    cols = ["h", "ps_gap", "polar_gap", "rel_lp_distance", "verdict"]
    print(",".join(cols))
    for row in table:
        print(",".join(str(row[c]) for c in cols))
    write_csv(table, os.path.join(OUT, "refine_table.csv"), columns=cols)
    write_json({"rows": table}, os.path.join(OUT, "refine_report.json"))
    for a, b in zip(table, table[1:]):
        print(f"h {a['h']:.5f} -> {b['h']:.5f}: ps_gap ratio "
              f"{b['ps_gap'] / max(a['ps_gap'], 1e-300):.3f}, rel_dist ratio "
              f"{b['rel_lp_distance'] / max(a['rel_lp_distance'], 1e-300):.3f}")


if __name__ == "__main__":
    main()
