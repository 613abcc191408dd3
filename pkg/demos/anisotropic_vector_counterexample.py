"""A smooth vectorial problem on the unit disk that loses smooth data.

For scalar problems on a uniformly convex domain, positive curvature
rescues any reasonable datum.  For systems this fails without a rank-one
splitting of the recession gradient: we build a smooth, even, uniformly
convex norm f0 on 2x2 matrices whose gradient locks onto rank-one lines
inside a small cone, pick the smooth datum u0(x) = 1_{x1>0} eta(x2) x on
the unit circle, and certify that u = 0 is a minimizer, so the datum is
lost on a set of positive measure.

The norm comes from its dual f0*(v) = sqrt(A v . v + q(v)), with q a
cutoff of 2 v21^2 v22 / v11 around +-e1 tensor e1; f0 itself is evaluated
by Newton inversion of the gradient of f0*^2/2.
"""

import numpy as np

from lingrad import build_bad_f0, check_bad_grad
from lingrad.gallery import anisotropic_counterexample

f0 = build_bad_f0(1e-2)
print(f"constructed the anisotropic norm at eps = {f0.eps}")
print(f"  sampled convexity margin of the dual square: "
      f"{f0.convexity_margin(1024):.3f} (> 0)")
print(f"  empirical maximal eps: ~{f0.estimate_eps_max():.3f}")

print("\nrank-one gradient identity on a sweep of the cone |b| < eps/2:")
bs = np.linspace(-0.49 * f0.eps, 0.49 * f0.eps, 11)
res = [check_bad_grad(f0, 1.0, float(b)) for b in bs]
print(f"  max residual over the sweep: {max(res):.2e}")

case = anisotropic_counterexample(f0)
print("\ndatum: u0(x) = 1_(x1>0) eta(x2) x, a smooth bump near (1, 0);")
print("certificate z(x) = etabar(x2) g(x2), divergence-free by structure:")
pts = np.random.default_rng(0).uniform(-0.7, 0.7, (100, 2))
print(f"  max |div z| (finite differences): {np.abs(case.analytic._div_z(pts)).max():.2e}")
rep = case.verify_reference(1e-6)
for name, cond in rep.conditions.items():
    print(f"  {name}: L1 {cond.l1:.2e}")
print(f"  certificate pass: {rep.overall_pass} -- u = 0 minimizes, the "
      "smooth datum is not attained.")
