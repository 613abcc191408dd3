"""Generalized boundary curvature, and the 1D weighted problem where the
size bound on the source term is exactly sharp.

The curvature of the boundary with respect to an integrand f generalizes
mean curvature (disk -> 1, sphere -> 2, annulus inner loop -> -1 for TV);
for the weighted 1D integrand a(x)|u'| the endpoint curvatures are a'(1)
and -a'(0).  Choosing the source g = a'(x) makes |g| touch the curvature
at both ends, and the datum -1, 1 is lost: u = 0 is a certified minimizer
with certificate z = a(x).
"""

import numpy as np

from lingrad import (
    Annulus,
    Ball,
    Interval,
    generalized_mean_curvature,
    get_case,
    make_tv,
    make_weighted_tv,
)

print("generalized mean curvature (TV integrand):")
print(f"  unit circle (d=2) : {generalized_mean_curvature(make_tv(1, 2), Ball(1.0), [1, 0]):+.6f}")
print(f"  unit sphere (d=3) : {generalized_mean_curvature(make_tv(1, 3), Ball(1.0, 3), [0, 0, 1]):+.6f}")
print(f"  annulus inner loop: {generalized_mean_curvature(make_tv(1, 2), Annulus(1.0, 2.0), [1, 0]):+.6f}")
print(f"  radius-2 circle   : {generalized_mean_curvature(make_tv(1, 2), Ball(2.0), [2, 0]):+.6f}")

a = lambda x: 2.0 - np.sin(np.pi * np.asarray(x))
w = make_weighted_tv(lambda p: a(p[..., 0]), d=1, a_bounds=(1.0, 2.0))
print("\nweighted 1D integrand a(x)|u'| with a = 2 - sin(pi x):")
print(f"  curvature at x = 1: {generalized_mean_curvature(w, Interval(0, 1), [1.0]):+.6f}  (= a'(1) = pi)")
print(f"  curvature at x = 0: {generalized_mean_curvature(w, Interval(0, 1), [0.0]):+.6f}  (= -a'(0) = pi)")

case = get_case("weighted_tv_1d")
rep = case.verify_reference(1e-10)
print("\ncertificate for u = 0 with z = a(x), g = a'(x), data -1/1:")
for name, cond in rep.conditions.items():
    print(f"  {name}: L1 {cond.l1:.2e}")
print(f"  pass: {rep.overall_pass} -- the datum is lost at both endpoints "
      "even though both endpoint curvatures are positive.")
