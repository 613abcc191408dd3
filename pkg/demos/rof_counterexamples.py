"""Two explicit failures of Dirichlet data for the TV-plus-quadratic model.

Both cases ship closed-form minimizers u and dual certificates z, and both
lose their boundary datum even though everything in sight is smooth:

* annulus: Omega = B1 minus B_1/2, datum 4/(3r) - 4/3; the certificate
  z = (2/3) x - (4/3) x/|x| proves u = 0 optimal, and u = 0 has trace 0
  while the datum is 4/3 on the inner circle.  The inner loop has negative
  curvature.
* ball (d = 3, evaluated on radial samples): datum 0 with fit target
  (1+t) * 2/|x|; the minimizer u = 2t/|x| is certified by z = -x/|x| and
  its trace 2t misses the datum by exactly the excess of the fit weight
  over the curvature bound.
"""

from lingrad import get_case

print("ROF annulus counterexample")
case = get_case("rof_annulus")
rep = case.verify_reference(1e-8)
for name, cond in rep.conditions.items():
    print(f"  {name}: L1 {cond.l1:.2e}, sup {cond.sup:.2e}")
print(f"  all conditions pass: {rep.overall_pass}")
u0_inner = case.analytic.u0([[0.5, 0.0]])[0]
print(f"  datum at |x| = 1/2: {u0_inner:.6f}; trace of the minimizer: 0.0\n")

print("ROF ball counterexample (radial d = 3), for a family of weights:")
for t in (0.5, 1.0, 2.0):
    case = get_case("rof_ball", t=t)
    rep = case.verify_reference(1e-8)
    u_at_boundary = case.analytic.u([[1.0, 0.0, 0.0]])[0]
    print(f"  t = {t}: certificate pass = {rep.overall_pass}; "
          f"|trace - datum| at the sphere = {u_at_boundary:.3f} (= 2t)")
