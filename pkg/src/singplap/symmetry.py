"""Moving-plane checks on 2D fields: reflections across {x1 = λ}, the sweep
over λ, and symmetry/monotonicity deviation measures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetricDomain, ReflectionLeavesDomain
from .problem import Disk, Rectangle

__all__ = ["PlanePosition", "SweepReport", "interpolate_field", "reflect", "moving_plane_sweep",
           "symmetry_deviation", "theorem_hypotheses"]


def _lagrange3(t, t0, t1, t2):
    """Quadratic Lagrange weights at ``t`` for nodes t0, t1, t2 (vectorized)."""
    w0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2))
    w1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2))
    w2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1))
    return w0, w1, w2


def _stencil(axis, t):
    i = np.clip(np.searchsorted(axis, t) , 1, axis.size - 2)
    # centre on the nearer of the two bracketing nodes
    left_closer = np.abs(t - axis[i - 1]) < np.abs(axis[i] - t)
    i = np.where(left_closer & (i > 1), i - 1, i)
    return i


def interpolate_field(fld, px, py):
    """Biquadratic (tensor grids) or radial-quadratic × angular-quadratic
    (polar grids) interpolation of nodal values."""
    px = np.atleast_1d(np.asarray(px, dtype=float))
    py = np.atleast_1d(np.asarray(py, dtype=float))
    g = fld.grid
    v = np.asarray(fld.values)
    if g.kind == "tensor":
        x, y = g.axes
        V = v.reshape(x.size, y.size)
        i = _stencil(x, px)
        j = _stencil(y, py)
        wx = _lagrange3(px, x[i - 1], x[i], x[i + 1])
        wy = _lagrange3(py, y[j - 1], y[j], y[j + 1])
        out = np.zeros_like(px)
        for a in range(3):
            for b in range(3):
                out += wx[a] * wy[b] * V[i - 1 + a, j - 1 + b]
        return out
    r, th = g.axes
    nt = th.size
    dth = th[1] - th[0]
    pr = np.hypot(px, py)
    pt = np.mod(np.arctan2(py, px), 2 * np.pi)
    jc = np.rint(pt / dth).astype(int)
    wt = _lagrange3(pt, (jc - 1) * dth, jc * dth, (jc + 1) * dth)

    def ring_value(i):
        out = np.zeros_like(pt)
        for a in range(3):
            jj = np.mod(jc - 1 + a, nt)
            out += wt[a] * np.where(i == 0, v[0], v[np.where(i == 0, 0, 1 + (i - 1) * nt + jj)])
        return out

    i = _stencil(r, pr)
    wr = _lagrange3(pr, r[i - 1], r[i], r[i + 1])
    return wr[0] * ring_value(i - 1) + wr[1] * ring_value(i) + wr[2] * ring_value(i + 1)


@dataclass(frozen=True)
class PlanePosition:
    lam: float
    cap: np.ndarray           # node mask of Ω_λ (interior nodes with x1 < λ)

    @classmethod
    def of(cls, grid, lam):
        a = grid.domain.x1_min
        if not a - 1e-12 <= lam <= 1e-12:
            raise ValueError(f"lambda must lie in [{a}, 0]")
        return cls(float(lam), (grid.x < lam) & ~grid.boundary)


def _check_reflection(grid, lam, px, py, cap):
    d = grid.domain.distance(px[cap], py[cap])
    if np.any(d < -1e-12):
        raise ReflectionLeavesDomain(f"the reflected cap leaves the domain at lambda={lam}")


def reflect(field2d, lam):
    """u_λ(x) = u(2λ - x1, x2) at every node whose reflection stays in Ω
    (NaN elsewhere).  ``meta['cap']`` is the node mask of Ω_λ."""
    from .solver2d import SolutionField2D

    g = field2d.grid
    pos = PlanePosition.of(g, lam) if lam <= 0 else None
    cap = pos.cap if pos is not None else (g.x < lam) & ~g.boundary
    px, py = 2 * lam - g.x, g.y
    _check_reflection(g, lam, px, py, cap)
    ok = g.domain.distance(px, py) >= -1e-12
    vals = np.full(g.n, np.nan)
    vals[ok] = interpolate_field(field2d, px[ok], py[ok])
    grad = np.full((g.n, 2), np.nan)
    return SolutionField2D(g, vals, grad, {**field2d.meta, "reflected_at": lam, "cap": cap})


@dataclass(frozen=True)
class SweepReport:
    lambdas: np.ndarray
    min_difference: np.ndarray
    lambda0: float
    tol: float
    spacing: float
    hypotheses: dict = field(default_factory=dict)

    def to_dict(self):
        return {"lambdas": self.lambdas.tolist(), "min_difference": self.min_difference.tolist(),
                "lambda0": self.lambda0, "tol": self.tol, "spacing": self.spacing,
                "hypotheses": self.hypotheses}


def theorem_hypotheses(problem) -> dict:
    """Advisory check of the symmetry theorem's assumptions."""
    out = {
        "reaction_positive": bool(problem.reaction.is_positive_on_positive_axis()),
        "q_in_range": bool(max(problem.p / 2.0, 1.0) <= problem.q <= problem.p),
        "strictly_convex_domain": isinstance(problem.domain, Disk),
    }
    out["satisfied"] = all(out.values())
    return out


def moving_plane_sweep(field2d, lambda_grid=None, tol=1e-10, problem=None) -> SweepReport:
    """min over Ω_λ of (u_λ - u) for each λ; λ₀ is the largest λ such that
    every λ' ≤ λ of the grid passes (min ≥ -tol)."""
    g = field2d.grid
    a = g.domain.x1_min
    if lambda_grid is None:
        lambda_grid = np.linspace(a, 0.0, 41)
    lams = np.sort(np.asarray(lambda_grid, dtype=float))
    hyp = {}
    if problem is not None:
        hyp = theorem_hypotheses(problem)
        if not hyp["satisfied"]:
            warnings.warn("symmetry hypotheses not met: run is exploratory", stacklevel=2)
    mins = np.empty(lams.size)
    u = np.asarray(field2d.values)
    for k, lam in enumerate(lams):
        cap = PlanePosition.of(g, lam).cap
        if not cap.any():
            mins[k] = np.inf
            continue
        px, py = 2 * lam - g.x[cap], g.y[cap]
        _check_reflection(g, lam, 2 * lam - g.x, g.y, cap)
        mins[k] = float(np.min(interpolate_field(field2d, px, py) - u[cap]))
    passed = mins >= -tol
    lam0 = a
    for lam, ok in zip(lams, passed):
        if not ok:
            break
        lam0 = lam
    return SweepReport(lams, mins, float(lam0), float(tol), g.spacing, hyp)


def _reflect_across(points, angle):
    """Mirror points across the line through 0 orthogonal to (cos a, sin a)."""
    e = np.array([np.cos(angle), np.sin(angle)])
    s = points @ e
    return points - 2 * s[:, None] * e[None, :], s


def symmetry_deviation(field2d, angle=0.0, tol=1e-10):
    """(sup |u - u∘R|, fraction of monotonicity violations on {s < 0}).

    R mirrors across the line orthogonal to e = (cos angle, sin angle) and s
    is the coordinate along e.  A violation is a node x with s(x) < 0 whose
    value exceeds u(x + δe) by more than ``tol``, δ = min(spacing, -s(x)).
    """
    g = field2d.grid
    dom = g.domain
    if isinstance(dom, Rectangle):
        if not np.isclose(np.cos(angle) * np.sin(angle), 0.0, atol=1e-12):
            raise AsymmetricDomain("a rectangle is only symmetric across its axes")
    elif not isinstance(dom, Disk):
        raise AsymmetricDomain(f"{type(dom).__name__} is not mirror symmetric")
    u = np.asarray(field2d.values)
    mirrored, s = _reflect_across(g.points, angle)
    uR = interpolate_field(field2d, mirrored[:, 0], mirrored[:, 1])
    inner = ~g.boundary
    dev = float(np.max(np.abs(u - uR)[inner]))
    e = np.array([np.cos(angle), np.sin(angle)])
    half = inner & (s < 0)
    step = np.minimum(g.spacing, -s[half])
    ahead = g.points[half] + step[:, None] * e[None, :]
    ua = interpolate_field(field2d, ahead[:, 0], ahead[:, 1])
    bad = u[half] - ua > tol
    frac = float(bad.mean()) if half.any() else 0.0
    return dev, frac
