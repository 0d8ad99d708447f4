"""Resolve the boundary layer of -u'' = u^-3 on (0, 1) and read off its shape.

Run with ``python demos/boundary_layer.py``.  The solution behaves like
sqrt(2) d^(1/2) near the walls; the script measures the exponent, the
scaled normal derivative and the power barriers that bracket u.
"""

import numpy as np

from singplap.asymptotics import LayerWindow, directional_derivative_limit, fit_boundary_rate
from singplap.barriers import barrier_power_eig, halfspace_profile
from singplap.comparison import find_barrier_sandwich
from singplap.eigen import first_eigenpair
from singplap.mesh import default_mesh
from singplap.problem import Interval, ProblemSpec, ReactionSpec, validate_problem
from singplap.solver1d import solve_radial

pr = validate_problem(ProblemSpec(p=2.0, gamma=3.0, q=1.0, theta=0.0,
                                  reaction=ReactionSpec.zero(), domain=Interval(1.0)))
mesh = default_mesh(pr.domain, 4096)
u = solve_radial(pr, mesh)
print(f"solved on {mesh.n_cells} cells, smallest cell {mesh.h.min():.1e}, "
      f"residual {u.meta['residual']:.1e}")

fit = fit_boundary_rate(u, LayerWindow(1e-5, 1e-2))
print(f"u ~ C d^a with a = {fit.exponent:.4f} (expected 0.5), C = {fit.constant:.4f}")

prof = halfspace_profile(2.0, 3.0)
for beta in (0.25, 0.5, 1.0):
    est = directional_derivative_limit(u, 2.0, 3.0, beta)
    print(f"beta={beta:<5} d^(1/2) du/dnu -> {est.limit:.5f}  "
          f"(half-line profile gives {prof.limit_constant(beta):.5f})")

eig = first_eigenpair(2.0, pr.domain, mesh)
res = find_barrier_sandwich(u, lambda s: barrier_power_eig(s, 2.0, 3.0, eig))
print(f"{res.s_lower:.4f} phi^(1/2) <= u <= {res.s_upper:.4f} phi^(1/2), phi = first eigenfunction")
print("max u =", np.round(u.values.max(), 6))
