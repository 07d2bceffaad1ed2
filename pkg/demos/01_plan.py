"""Plan a ULA run with a certified total-variation precision.

Given a potential, a drift certificate and a start point, the planner picks a
constant step gamma and an iteration count p such that the master bound on
||delta_x Q^p - pi||_TV (L1 convention, diameter 2) is at most epsilon.
"""
import numpy as np

from ulacert import certifier as cf
from ulacert import potentials as pt
from ulacert.errors import InfeasibleError

gauss = pt.isotropic_quadratic(4)
x = gauss.minimizer + np.array([2.0, 0.0, 0.0, 0.0])

print("Standard Gaussian in d = 4, start two units from the mode.")
for eps in (0.5, 0.25, 0.1):
    plan = cf.plan_precision("StrongConvex", gauss, None, x, eps)
    print(f"  epsilon {eps:<5} gamma {plan.gamma:.3e}  p {plan.p:>9,}  "
          f"re-certified bound {plan.certified_bound:.3f}")
print("Halving epsilon roughly quarters gamma and quadruples p, the expected eps^-2 cost.\n")

hub = pt.huber(2)
plan = cf.plan_precision("ReflectionConvex", hub, None, hub.minimizer, 0.25)
print("Huber potential in d = 2 through the reflection-coupling route:")
print(f"  gamma {plan.gamma:.3e}  p {plan.p:.3e}  horizon T {plan.T:.3g}")
print("The reflection constants are explicit but pessimistic, so p is large.\n")

print("Routes whose C bound blows up as gamma -> 0 cannot be planned:")
try:
    cf.plan_precision("Bobkov", hub, None, hub.minimizer, 0.25)
except InfeasibleError as exc:
    print(f"  InfeasibleError: {exc}")

fb = cf.plan_fixed_budget("StrongConvex", gauss, None, x, 10_000, 100)
print(f"\nFixed budget p = 10000, n = 100: gamma {fb.gamma:.3e}, bound {fb.bound:.3f}")
