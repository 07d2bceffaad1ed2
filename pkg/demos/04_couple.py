"""Reflection coupling of the Langevin diffusion.

Two copies started at x and y share Brownian increments reflected in the
hyperplane orthogonal to their difference. P(tau > t) bounds TV between the
two laws at time t. Times are on the clock of dY = -grad U / 2 dt + dB.
"""
import numpy as np

from ulacert.coupling import coupling_tail, tv_from_coupling
from ulacert import potentials as pt

ts = [0.5, 1.0, 2.0, 4.0]
tail = coupling_tail(lambda v: -0.5 * v, [1.0, 0.0], [-1.0, 0.0], ts, dt=1e-3, n_runs=5_000, seed=0)
print("Ornstein-Uhlenbeck, |x - y| = 2")
print(f"{'t':>5} {'P(tau > t)':>11} {'SE':>7} {'analytic':>9}")
for t, s, se, b in zip(ts, tail.survival, tail.se, tail.bound):
    print(f"{t:5.1f} {s:11.4f} {se:7.4f} {b:9.4f}")
print(f"halving dt moves the estimate by at most {np.max(tail.shift):.4f}; dt sensitive: {tail.dt_sensitive}")

model = pt.isotropic_quadratic(2)
tv = tv_from_coupling("StrongConvex", model, [2.0, 0.0], [4.0, 16.0, 32.0, 48.0], dt=1e-2, n_runs=2_000,
                      seed=1, halving=False)
print("\nStandard Gaussian, strong-convexity route: empirical 2 P(tau > t) vs theorem curve")
for t, e, th in zip(tv.tail.t, tv.empirical_tv, tv.theorem):
    print(f"  t {t:4.1f}  empirical {e:.4f}  theorem {th:.4f}")
print(f"theorem violations: {int(tv.violations.sum())}")
print("The certified rate is explicit but slow; it drops below 2 only after t = 16.")
