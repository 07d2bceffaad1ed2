"""Check certified bounds against exact oracles.

For the Gaussian target the law of X_p is Gaussian in closed form. For other
1-D targets a quadrature oracle propagates the density on a grid.
"""
import numpy as np

from ulacert import certifier as cf
from ulacert import oracle as orc
from ulacert import potentials as pt
from ulacert import schedule as sch

gauss = pt.isotropic_quadratic(1)
pi = orc.GaussianDist(np.zeros(1), 1.0)
ps = [100, 1000, 10_000, 100_000]
print("Gaussian, x = 3: certified bound vs exact L1 distance")
for g in (0.1, 0.01, 0.001):
    curve = cf.tv_bound_curve("StrongConvex", gauss, None, sch.Constant(g), [3.0], p_values=ps)
    for p, b in zip(ps, curve.total):
        tv = 2 * orc.gaussian_tv(orc.gaussian_ula_marginal([3.0], g, p), pi)
        print(f"  gamma {g:<5} p {p:>7}  bound {b:.4f}  exact {tv:.4f}")
print("A bound of 2 is trivial. Smaller steps need longer runs before the bound bites, "
      "and then reach a lower floor.")

c = orc.pinsker_rhs([1.0], 0.1, 20, 1)
print(f"\nPinsker chain at gamma 0.1, p 20: (2 TV)^2 = {(2 * c.tv) ** 2:.3e} <= "
      f"2 KL = {2 * c.kl_reverse:.3e} <= rhs = {c.rhs:.3e}")

hub = pt.huber(1)
s = sch.Constant(0.05)
dens = orc.grid_propagate(hub, s, 3.0, 400, record_at=[50, 400])
target = orc.target_density(hub, dens[400])
curve = cf.tv_bound_curve("ReflectionConvex", hub, None, s, [3.0], p_values=[50, 400])
print("\nHuber, grid oracle:")
for p, b in zip([50, 400], curve.total):
    g = orc.grid_tv(dens[p], target)
    print(f"  p {p:>4}  bound {b:.3f}  grid L1 {2 * g.value:.4f} (error {2 * g.error:.1e})")
print("The reflection bound holds but stays trivial at these budgets (see 01_plan.py for the p it needs).")
