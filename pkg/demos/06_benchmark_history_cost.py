"""The documented scaling hot spot: quadratic history quadrature.

The kernel is genuinely two-variable, so the memory integral in the
feedback is recomputed per step over the whole past at O(t/dt) cost, and
a full run costs O((T/dt)^2) in the small unstable block. This script
measures both the kernel synthesis and the simulation loop against the
horizon to exhibit the quadratic growth.
"""

import time

import numpy as np

import delaystab as ds

model = ds.build_custom_lti([[1.0]], [[1.0]], shift=5.0)
split = ds.compute_split(model, 0.5)
design = ds.design_gain(split, 0.5, sigma_star=0.55)
dt = 0.0025

print(f"{'horizon':>8} {'steps':>7} {'kernel[s]':>10} {'simulate[s]':>12} "
      f"{'total[s]':>9}")
rows = []
for horizon in (2.0, 4.0, 8.0, 16.0):
    t0 = time.perf_counter()
    kernel = ds.solve_kernel(design, horizon, dt, residual_tol=np.inf)
    t1 = time.perf_counter()
    ds.simulate_linear(model, split, design, kernel,
                       np.array([1.0]), None, horizon, dt)
    t2 = time.perf_counter()
    n = int(horizon / dt)
    rows.append((horizon, n, t1 - t0, t2 - t1))
    print(f"{horizon:8.1f} {n:7d} {t1 - t0:10.3f} {t2 - t1:12.3f} "
          f"{t2 - t0:9.3f}")

print("\ndoubling the horizon should roughly quadruple the cost:")
for (h0, n0, k0, s0), (h1, n1, k1, s1) in zip(rows, rows[1:]):
    print(f"  T {h0:4.1f} -> {h1:4.1f}: kernel x{k1 / k0:4.1f}, "
          f"simulate x{s1 / s0:4.1f}")
