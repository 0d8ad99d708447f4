"""One-dimensional meshes with geometric boundary grading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import Annulus, Ball, Interval

__all__ = ["Mesh1D", "nodal_gradient", "default_mesh"]


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray
    grading: str = "uniform"
    ratio: float = 1.0
    level: int = 0

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if np.any(np.diff(x) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.grading == "geometric" and not 1.0 < self.ratio <= 2.0:
            raise ValueError("geometric grading ratio must lie in (1, 2]")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @property
    def n_cells(self):
        return self.nodes.size - 1

    @property
    def h(self):
        return np.diff(self.nodes)

    @property
    def length(self):
        return self.nodes[-1] - self.nodes[0]

    @classmethod
    def uniform(cls, a, b, n_cells):
        return cls(np.linspace(a, b, n_cells + 1), "uniform", 1.0)

    @classmethod
    def geometric(cls, a, b, n_cells, ratio=1.15, h_min=None, sides=("left", "right")):
        """Cells grow like c * ratio**k away from the graded ends and are
        uniform in the middle, with the ratio also holding across the join.

        The number of graded cells k is the smallest for which the first
        cell c does not exceed ``h_min`` (so h_min / ratio < c <= h_min).
        Raises ValueError when ``n_cells`` is too small for that.
        """
        L = b - a
        if h_min is None:
            h_min = 1e-8 * L
        if not 1.0 < ratio <= 2.0:
            raise ValueError("geometric grading ratio must lie in (1, 2]")
        s = len(sides)

        def first_cell(k):
            # c r^k (n - s k) + s c (r^k - 1)/(r - 1) = L
            return L / (ratio**k * (n_cells - s * k) + s * (ratio**k - 1.0) / (ratio - 1.0))

        if first_cell(0) <= h_min:
            return cls.uniform(a, b, n_cells)
        k = next((k for k in range(1, (n_cells - 1) // s + 1) if first_cell(k) <= h_min), None)
        if k is None:
            raise ValueError(f"{n_cells} cells cannot grade from h_min={h_min:g} at ratio {ratio}")
        c = first_cell(k)
        offsets = np.concatenate([[0.0], np.cumsum(c * ratio ** np.arange(k))])
        n_mid = n_cells - s * k
        # graded ends are measured from their own endpoint and the uniform
        # middle is a linspace, so no rounding accumulates along the mesh
        left = a + offsets if "left" in sides else np.array([a])
        right = b - offsets[::-1] if "right" in sides else np.array([b])
        mid = np.linspace(left[-1], right[0], n_mid + 1)
        x = np.concatenate([left[:-1], mid, right[1:]])
        return cls(x, "geometric", ratio)

    def refine(self):
        """Bisect every cell (doubles the number of boundary cells)."""
        x = self.nodes
        mid = 0.5 * (x[:-1] + x[1:])
        out = np.empty(2 * x.size - 1)
        out[0::2] = x
        out[1::2] = mid
        return Mesh1D(out, self.grading, self.ratio, self.level + 1)

    def scaled(self, factor, shift=0.0):
        return Mesh1D(shift + factor * self.nodes, self.grading, self.ratio, self.level)


def default_mesh(domain, n_cells=4096, ratio=1.15, h_min_rel=1e-8):
    """Graded mesh resolving the boundary layers of a 1D/radial domain."""
    if isinstance(domain, Interval):
        return Mesh1D.geometric(0.0, domain.R, n_cells, ratio, h_min_rel * domain.R)
    if isinstance(domain, Annulus):
        L = domain.r2 - domain.r1
        return Mesh1D.geometric(domain.r1, domain.r2, n_cells, ratio, h_min_rel * L)
    if isinstance(domain, Ball):
        return Mesh1D.geometric(0.0, domain.R, n_cells, ratio, h_min_rel * domain.R,
                                sides=("right",))
    raise TypeError(f"no 1D mesh for {type(domain).__name__}")


def nodal_gradient(x, u):
    """Second-order derivative samples: three-point central formula at
    interior nodes, one-sided three-point formulas at the ends."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    g[1:-1] = (-hp / (hm * (hm + hp)) * u[:-2]
               + (hp - hm) / (hm * hp) * u[1:-1]
               + hm / (hp * (hm + hp)) * u[2:])
    if u.size >= 3:
        h1, h2 = x[1] - x[0], x[2] - x[1]
        g[0] = (-(2 * h1 + h2) / (h1 * (h1 + h2)) * u[0]
                + (h1 + h2) / (h1 * h2) * u[1]
                - h1 / (h2 * (h1 + h2)) * u[2])
        h1, h2 = x[-1] - x[-2], x[-2] - x[-3]
        g[-1] = ((2 * h1 + h2) / (h1 * (h1 + h2)) * u[-1]
                 - (h1 + h2) / (h1 * h2) * u[-2]
                 + h1 / (h2 * (h1 + h2)) * u[-3])
    else:
        g[:] = (u[1] - u[0]) / (x[1] - x[0])
    return g
