#!/usr/bin/env python3
"""3D Dirichlet eigenvalue benchmark: minimized quadratic energy vs pi^2."""

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from symmin import GridFunction, MinimizeOptions, minimize, preset


def main():
    model = preset("eigen3d")
    domain = model.default_domain()
    rng = np.random.default_rng(11)
    vals = rng.random(domain.grid_shape)
    vals[~domain.mask] = 0.0
    u0 = GridFunction(domain, vals, nonneg=True)
    t0 = time.time()
    res = minimize(model, u0, MinimizeOptions(max_iters=3000, grad_tol=1e-5, seed=3))
    E = res.breakdown.E
    target = np.pi ** 2
    print(f"grid {domain.grid_shape}, {domain.unmasked_count} active cells")
    print(f"E = {E:.6f}, pi^2 = {target:.6f}, relative error {(E - target) / target:+.3%}")
    print(f"lambda estimate = {res.lam:.6f}")
    print(f"{res.iterations} iterations, converged={res.converged}, {time.time()-t0:.1f}s")


if __name__ == "__main__":
    main()
