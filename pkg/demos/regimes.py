"""How the boundary behaviour changes with the strength of the singularity.

For gamma > 1 the solution vanishes like d^(p/(gamma+p-1)); at gamma = 1 a
logarithmic factor appears; below 1 the gradient stays bounded and the
solution leaves the wall linearly.  Run with ``python demos/regimes.py``.
"""

from singplap.asymptotics import (LayerWindow, fit_boundary_rate, fit_log_correction,
                                  gradient_bound_check)
from singplap.mesh import default_mesh
from singplap.problem import Interval, ProblemSpec, ReactionSpec, validate_problem
from singplap.solver1d import solve_radial


def solve(gamma, p=2.0):
    pr = validate_problem(ProblemSpec(p=p, gamma=gamma, q=1.0, theta=0.0,
                                      reaction=ReactionSpec.zero(), domain=Interval(1.0)))
    return solve_radial(pr, default_mesh(pr.domain, 4096))


print("gamma  fitted  predicted")
for gamma in (1.5, 2.0, 3.0, 5.0, 8.0):
    fit = fit_boundary_rate(solve(gamma), LayerWindow(1e-5, 1e-2))
    print(f"{gamma:5.1f}  {fit.exponent:.4f}  {2 / (gamma + 1):.4f}")

log = fit_log_correction(solve(1.0), LayerWindow(1e-6, 1e-2), 2.0)
print(f"\ngamma = 1: u/d against (1 - ln d)^(1/2) has r2 {log.r2:.5f}; "
      f"a plain linear model only reaches {log.r2_linear:.3f}")

gb = gradient_bound_check(solve(0.5), 2.0, 0.5)
print(f"gamma = 0.5: sup |u'| = {gb.sup_scaled:.5f}, u'(0+) = {gb.boundary_derivative:.5f}")
