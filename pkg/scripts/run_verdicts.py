#!/usr/bin/env python3
"""Run the radiality verdict for the 2D presets at full scale and print reports.

Writes symmetry reports (JSON) and minimizer snapshots under results/verdicts/.
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from symmin import MinimizeOptions, feasible_start, preset, verify_theorem
from symmin.reportio import write_json

OUT = os.path.join(os.path.dirname(__file__), "..", "results", "verdicts")


def main():
    os.makedirs(OUT, exist_ok=True)
    opts = MinimizeOptions(max_iters=6000, grad_tol=1e-6, symmetrize_every=10, seed=3)
    for name in ("plaplace", "quasilinear"):
        model = preset(name)
        domain = model.default_domain()
        u0 = feasible_start(model, 1.0, domain, center=(0.9, 0.6))
        t0 = time.time()
        rep = verify_theorem(model, u0, opts)
        dt = time.time() - t0
        write_json(rep.to_dict(), os.path.join(OUT, f"{name}_symmetry_report.json"))
        print(f"{name}: verdict={rep.verdict} rel_lp_distance={rep.rel_lp_distance:.3e} "
              f"E={rep.E_final:.6f} polish_cost={rep.polish_energy_cost:.2e} "
              f"cstar={rep.cstar_measure:.3f} ({dt:.1f}s)")


if __name__ == "__main__":
    main()
