"""First Dirichlet eigenpair of the p-Laplacian on 1D/radial domains.

Inverse power iteration: solve -Δ_p w = φ_k^(p-1) with the radial solver,
normalize to sup-norm one, repeat until the discrete Rayleigh quotient
settles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .fields import SolutionField, distance_on_mesh
from .mesh import Mesh1D
from .solver1d import RadialDiscretization, SolverOptions, solve_with_source

__all__ = ["Eigenpair", "first_eigenpair", "rayleigh_quotient"]


@dataclass(frozen=True, eq=False)
class Eigenpair:
    lambda1: float
    phi1: SolutionField
    p: float
    iterations: int = 0

    @property
    def grad_phi1(self):
        return self.phi1.gradient

    @property
    def values(self):
        return self.phi1.values

    @property
    def mesh(self):
        return self.phi1.mesh

    normalization = "sup"


def rayleigh_quotient(disc: RadialDiscretization, phi, p):
    """∫|φ'|^p / ∫|φ|^p with exact P1 gradients and lumped mass."""
    g = np.diff(phi) / disc.h
    num = np.sum(disc.omega * disc.h * np.abs(g) ** p)
    den = np.sum(disc.mass * np.abs(phi) ** p)
    return num / den


def first_eigenpair(p, domain, mesh: Mesh1D, tol=1e-10, max_iter=500,
                    opts: SolverOptions | None = None) -> Eigenpair:
    if not p > 1:
        raise ValueError("p must exceed 1")
    if mesh.n_cells < 64:
        raise ValueError("the eigen solver needs at least 64 cells")
    opts = opts or SolverOptions(tol=1e-12)
    disc = RadialDiscretization(mesh, domain)
    d = distance_on_mesh(domain, mesh.nodes)
    phi = d * (1.0 - d / (2.0 * domain.inradius))
    phi /= phi.max()
    lam_old = rayleigh_quotient(disc, phi, p)
    w = None
    for it in range(1, max_iter + 1):
        rhs = np.abs(phi) ** (p - 1.0)
        guess = None if w is None else w
        w, _ = solve_with_source(mesh, domain, p, rhs, opts, initial=guess)
        phi = w / w.max()
        lam = rayleigh_quotient(disc, phi, p)
        if abs(lam - lam_old) <= tol * abs(lam):
            phi[~disc.free] = 0.0
            field = SolutionField.from_values(mesh, phi, domain,
                                              {"lambda1": lam, "iterations": it})
            return Eigenpair(float(lam), field, p, it)
        lam_old = lam
    raise NoConvergence(f"inverse iteration did not settle in {max_iter} steps", phi)
