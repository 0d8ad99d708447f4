"""Nodal fields produced by the solvers or built from closed forms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh1D, nodal_gradient
from .problem import Annulus, Ball, Interval

__all__ = ["SolutionField", "distance_on_mesh"]


def distance_on_mesh(domain, x):
    """Distance to the boundary at 1D/radial coordinates ``x``."""
    if isinstance(domain, Interval):
        return domain.distance(x)
    if isinstance(domain, (Annulus, Ball)):
        return domain.distance_radial(x)
    raise TypeError(f"{type(domain).__name__} is not a 1D/radial domain")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Values of u (and u') on a 1D or radial mesh.

    ``meta`` carries solver provenance: problem hash, final regularization,
    iteration counts and the continuation path.
    """

    mesh: Mesh1D
    values: np.ndarray
    gradient: np.ndarray
    domain: object
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "gradient", _frozen(self.gradient))
        if self.values.shape != self.mesh.nodes.shape:
            raise ValueError("values do not match the mesh")

    @classmethod
    def from_values(cls, mesh, values, domain, meta=None):
        return cls(mesh, values, nodal_gradient(mesh.nodes, values), domain, dict(meta or {}))

    @classmethod
    def from_function(cls, mesh, fn, domain, grad=None, meta=None):
        """Sample ``fn`` at the nodes; ``grad`` gives exact derivative samples."""
        x = mesh.nodes
        u = np.asarray(fn(x), dtype=float)
        g = np.asarray(grad(x), dtype=float) if grad is not None else nodal_gradient(x, u)
        return cls(mesh, u, g, domain, dict(meta or {}))

    @property
    def x(self):
        return self.mesh.nodes

    @property
    def distance(self):
        return distance_on_mesh(self.domain, self.mesh.nodes)

    def boundary_mask(self):
        """Nodes carrying a Dirichlet condition (the ball centre is not one)."""
        mask = np.zeros(self.x.size, dtype=bool)
        mask[-1] = True
        if not isinstance(self.domain, Ball):
            mask[0] = True
        return mask

    def side_arrays(self, side="left"):
        """(d, u, du/dν) ordered by increasing distance from one boundary
        component, with ν the inward normal there."""
        x, u, g = self.x, self.values, self.gradient
        if isinstance(self.domain, Ball):
            side = "right"
        if side == "left":
            d = x - x[0]
            return d, u, g
        d = (x[-1] - x)[::-1]
        return d, u[::-1], -g[::-1]

    def with_values(self, values, **meta):
        return SolutionField.from_values(self.mesh, values, self.domain, {**self.meta, **meta})
