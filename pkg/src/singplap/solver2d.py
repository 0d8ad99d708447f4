"""Finite-volume solver on rectangles (tensor grids) and disks (polar grids).

Both grids are reduced to the same representation: a list of nodes with
coordinates and control-volume areas, a list of faces (node pairs with a
geometric transmissibility), and sparse nodal-gradient operators.  The
p-flux through a face is T·k·(u_b - u_a) with k = |∇u|^(p-2) at the face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import NegativeIterate, NoConvergence, TooCloseToBoundary
from .mesh import Mesh1D
from .problem import Disk, Rectangle, Regime, ValidatedProblem
from .solver1d import SolverOptions, halfspace_amplitude

__all__ = ["Grid2D", "SolutionField2D", "solve_grid2d", "directional_derivative",
           "tensor_grid", "polar_grid", "torsion_series"]

log = logging.getLogger(__name__)


def _axis_gradient(x):
    """Sparse 3-point derivative matrix on nodes ``x`` (one-sided at the ends)."""
    n = x.size
    rows, cols, vals = [], [], []
    for i in range(n):
        if i == 0:
            h1, h2 = x[1] - x[0], x[2] - x[1]
            st = [(0, -(2 * h1 + h2) / (h1 * (h1 + h2))), (1, (h1 + h2) / (h1 * h2)),
                  (2, -h1 / (h2 * (h1 + h2)))]
        elif i == n - 1:
            h1, h2 = x[-1] - x[-2], x[-2] - x[-3]
            st = [(n - 1, (2 * h1 + h2) / (h1 * (h1 + h2))), (n - 2, -(h1 + h2) / (h1 * h2)),
                  (n - 3, h1 / (h2 * (h1 + h2)))]
        else:
            hm, hp = x[i] - x[i - 1], x[i + 1] - x[i]
            st = [(i - 1, -hp / (hm * (hm + hp))), (i, (hp - hm) / (hm * hp)),
                  (i + 1, hm / (hp * (hm + hp)))]
        for j, v in st:
            rows.append(i)
            cols.append(j)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(eq=False)
class Grid2D:
    kind: str                      # "tensor" or "polar"
    domain: object
    points: np.ndarray             # (n, 2)
    area: np.ndarray               # control-volume areas
    boundary: np.ndarray           # Dirichlet mask
    faces: np.ndarray              # (m, 2) node pairs
    trans: np.ndarray              # transmissibility per face
    Gx: sp.csr_matrix
    Gy: sp.csr_matrix
    axes: tuple                    # (x, y) for tensor, (r, theta) for polar
    level: int = 0

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def spacing(self):
        """Largest node spacing along x1 (one grid spacing)."""
        if self.kind == "tensor":
            return float(np.max(np.diff(self.axes[0])))
        r, th = self.axes
        return float(max(np.max(np.diff(r)), r[-1] * (th[1] - th[0])))

    def distance(self):
        return self.domain.distance(self.x, self.y)

    def refine(self):
        if self.kind == "tensor":
            mx = _bisect(self.axes[0])
            my = _bisect(self.axes[1])
            g = tensor_grid(self.domain, mx, my)
        else:
            g = polar_grid(self.domain, _bisect(self.axes[0]), 2 * self.axes[1].size)
        g.level = self.level + 1
        return g


def _bisect(x):
    out = np.empty(2 * x.size - 1)
    out[0::2] = x
    out[1::2] = 0.5 * (x[:-1] + x[1:])
    return out


def _nodes(m):
    return m.nodes if isinstance(m, Mesh1D) else np.asarray(m, dtype=float)


def tensor_grid(domain: Rectangle, xs, ys) -> Grid2D:
    """Tensor grid on the centred rectangle from axis node arrays (or meshes)."""
    x, y = _nodes(xs), _nodes(ys)
    if abs(x[0] + domain.a / 2) > 1e-12 or abs(x[-1] - domain.a / 2) > 1e-12:
        raise ValueError("x nodes must span [-a/2, a/2]")
    if abs(y[0] + domain.b / 2) > 1e-12 or abs(y[-1] - domain.b / 2) > 1e-12:
        raise ValueError("y nodes must span [-b/2, b/2]")
    nx, ny = x.size, y.size
    X, Y = np.meshgrid(x, y, indexing="ij")
    idx = np.arange(nx * ny).reshape(nx, ny)
    wx = np.zeros(nx)
    wx[1:-1] = 0.5 * (x[2:] - x[:-2])
    wy = np.zeros(ny)
    wy[1:-1] = 0.5 * (y[2:] - y[:-2])
    area = np.outer(wx, wy).ravel()
    bnd = np.zeros((nx, ny), dtype=bool)
    bnd[[0, -1], :] = True
    bnd[:, [0, -1]] = True
    # x-faces between (i, j) and (i+1, j) for interior rows j
    fx = np.stack([idx[:-1, 1:-1].ravel(), idx[1:, 1:-1].ravel()], axis=1)
    tx = (np.broadcast_to(wy[None, 1:-1], (nx - 1, ny - 2)) / np.diff(x)[:, None]).ravel()
    fy = np.stack([idx[1:-1, :-1].ravel(), idx[1:-1, 1:].ravel()], axis=1)
    ty = (np.broadcast_to(wx[1:-1, None], (nx - 2, ny - 1)) / np.diff(y)[None, :]).ravel()
    Dx, Dy = _axis_gradient(x), _axis_gradient(y)
    Gx = sp.kron(Dx, sp.identity(ny), format="csr")
    Gy = sp.kron(sp.identity(nx), Dy, format="csr")
    return Grid2D("tensor", domain, np.stack([X.ravel(), Y.ravel()], axis=1), area, bnd.ravel(),
                  np.concatenate([fx, fy]), np.concatenate([tx, ty]), Gx, Gy, (x, y))


def polar_grid(domain: Disk, rs, n_theta) -> Grid2D:
    """Polar grid: origin node plus rings r_1 < ... < r_n = R of ``n_theta``
    equally spaced angles (θ_0 = 0).  ``n_theta`` must be a multiple of 4 so
    the grid is invariant under both axis reflections."""
    r = _nodes(rs)
    if abs(r[0]) > 1e-15 or abs(r[-1] - domain.R) > 1e-12:
        raise ValueError("radial nodes must span [0, R]")
    if n_theta % 4 or n_theta < 8:
        raise ValueError("n_theta must be a multiple of 4 and at least 8")
    nr = r.size - 1
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    dth = 2 * np.pi / n_theta

    def node(i, j):
        return 0 if i == 0 else 1 + (i - 1) * n_theta + (j % n_theta)

    n = 1 + nr * n_theta
    pts = np.zeros((n, 2))
    R_, T_ = np.meshgrid(r[1:], th, indexing="ij")
    pts[1:, 0] = (R_ * np.cos(T_)).ravel()
    pts[1:, 1] = (R_ * np.sin(T_)).ravel()
    rh = 0.5 * (r[:-1] + r[1:])                    # r_{i+1/2}, i = 0..nr-1
    area = np.zeros(n)
    area[0] = np.pi * rh[0] ** 2
    outer = np.append(rh[1:], r[-1])
    ring_area = 0.5 * (outer ** 2 - rh ** 2) * dth   # rings 1..nr
    area[1:] = np.repeat(ring_area, n_theta)
    area[1 + (nr - 1) * n_theta:] = 0.0
    bnd = np.zeros(n, dtype=bool)
    bnd[1 + (nr - 1) * n_theta:] = True
    faces, trans = [], []
    for i in range(nr):
        for j in range(n_theta):
            faces.append((node(i, j), node(i + 1, j)))
            trans.append(rh[i] * dth / (r[i + 1] - r[i]))
    for i in range(1, nr):
        width = outer[i - 1] - rh[i - 1]
        for j in range(n_theta):
            faces.append((node(i, j), node(i, j + 1)))
            trans.append(width / (r[i] * dth))
    faces = np.array(faces)
    trans = np.array(trans)
    Gx, Gy = _polar_gradient(r, th, node, n)
    return Grid2D("polar", domain, pts, area, bnd, faces, trans, Gx, Gy, (r, th))


def _polar_gradient(r, th, node, n):
    nt = th.size
    dth = th[1] - th[0]
    rows, cols, vx, vy = [], [], [], []

    def add(row, col, ax, ay):
        rows.append(row)
        cols.append(col)
        vx.append(ax)
        vy.append(ay)

    # origin: first Fourier mode of ring 1 through the origin value
    for j in range(nt):
        add(0, node(1, j), 2 * np.cos(th[j]) / (nt * r[1]), 2 * np.sin(th[j]) / (nt * r[1]))
    Dr = _axis_gradient(r).toarray()
    nr = r.size - 1
    for i in range(1, nr + 1):
        if i == nr:
            st = [(nr, Dr[nr, nr]), (nr - 1, Dr[nr, nr - 1]), (nr - 2, Dr[nr, nr - 2])]
        else:
            st = [(i - 1, Dr[i, i - 1]), (i, Dr[i, i]), (i + 1, Dr[i, i + 1])]
        for j in range(nt):
            c, s = np.cos(th[j]), np.sin(th[j])
            row = node(i, j)
            for k, w in st:
                add(row, node(k, j), c * w, s * w)
            for dj, w in ((1, 0.5 / (dth * r[i])), (-1, -0.5 / (dth * r[i]))):
                add(row, node(i, j + dj), -s * w, c * w)
    Gx = sp.csr_matrix((vx, (rows, cols)), shape=(n, n))
    Gy = sp.csr_matrix((vy, (rows, cols)), shape=(n, n))
    return Gx, Gy


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SolutionField2D:
    grid: Grid2D
    values: np.ndarray
    gradient: np.ndarray           # (n, 2)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        g = np.array(self.gradient, dtype=float)
        v.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "gradient", g)

    @classmethod
    def from_values(cls, grid, values, meta=None):
        v = np.asarray(values, dtype=float)
        return cls(grid, v, np.stack([grid.Gx @ v, grid.Gy @ v], axis=1), dict(meta or {}))

    @classmethod
    def from_function(cls, grid, fn, meta=None):
        return cls.from_values(grid, fn(grid.x, grid.y), meta)

    @property
    def domain(self):
        return self.grid.domain

    @property
    def mesh(self):
        return self.grid

    def interpolate(self, px, py):
        from .symmetry import interpolate_field
        return interpolate_field(self, px, py)


# ---------------------------------------------------------------------------
# discrete operator
# ---------------------------------------------------------------------------

class _Operator:
    def __init__(self, grid: Grid2D, p, theta, q, floor):
        self.g = grid
        self.p, self.theta, self.q, self.floor = p, theta, q, floor
        a, b = grid.faces[:, 0], grid.faces[:, 1]
        self.a, self.b = a, b
        m = a.size
        n = grid.n
        # signed incidence: (C u)_f = u_b - u_a
        self.C = sp.csr_matrix((np.r_[-np.ones(m), np.ones(m)], (np.r_[np.arange(m), np.arange(m)],
                                np.r_[a, b])), shape=(m, n))
        self.free = ~grid.boundary
        pa, pb = grid.points[a], grid.points[b]
        self.flen = np.linalg.norm(pb - pa, axis=1)
        self.tangent = (pb - pa) / self.flen[:, None]

    def face_coef(self, u):
        if self.p == 2:
            return np.ones(self.a.size)
        g = self.g
        G = np.stack([g.Gx @ u, g.Gy @ u], axis=1)
        avg = 0.5 * (G[self.a] + G[self.b])
        dn = (u[self.b] - u[self.a]) / self.flen
        # replace the along-face component of the averaged gradient by the exact difference
        along = np.sum(avg * self.tangent, axis=1)
        full = avg + (dn - along)[:, None] * self.tangent
        mag = np.maximum(np.linalg.norm(full, axis=1), self.floor)
        return mag ** (self.p - 2.0)

    def grad(self, u):
        return self.g.Gx @ u, self.g.Gy @ u

    def residual(self, u, source):
        g = self.g
        k = self.face_coef(u)
        fl = g.trans * k * (self.C @ u)
        F = self.C.T @ fl
        mag = abs(self.C.T) @ np.abs(fl)
        S, _ = source(u)
        if self.theta:
            gx, gy = self.grad(u)
            hj = self.theta * np.hypot(gx, gy) ** self.q
            F += g.area * hj
            mag += g.area * hj
        F -= g.area * S
        mag += g.area * np.abs(S)
        return F, mag

    def relative(self, u, F, mag):
        g = self.g
        noise = 16 * np.finfo(float).eps * (abs(self.C.T) @ (g.trans * (abs(self.C) @ np.abs(u))))
        noise = noise * max(1.0, abs(self.p - 1.0))
        f = self.free
        return np.maximum(np.abs(F[f]) - noise[f], 0.0) / (mag[f] + 1e-300)

    def jacobian(self, u, source):
        g = self.g
        k = self.face_coef(u) * (self.p - 1.0 if self.p != 2 else 1.0)
        K = self.C.T @ sp.diags(g.trans * k) @ self.C
        J = K.tocsr()
        if self.theta:
            gx, gy = self.grad(u)
            mag = np.maximum(np.hypot(gx, gy), self.floor)
            w = self.theta * self.q * mag ** (self.q - 2.0) * g.area
            J = J + sp.diags(w * gx) @ g.Gx + sp.diags(w * gy) @ g.Gy
        _, dS = source(u)
        J = J - sp.diags(g.area * dS)
        return J.tocsr()


def _initial_guess2d(problem, grid, trace):
    d = np.clip(grid.distance(), 0.0, None)
    rho = grid.domain.inradius
    deff = np.clip(d - d * d / (2 * rho), 0.0, None)
    if problem.regime is Regime.STRONG:
        m = problem.boundary_exponent
        A = halfspace_amplitude(problem.p, problem.gamma)
    else:
        m, A = 1.0, 1.0
    return trace + A * deff ** m


def _newton2d(op: _Operator, u0, source, opts: SolverOptions, positive=True):
    u = u0.copy()
    free = op.free
    fidx = np.flatnonzero(free)
    history = []

    def merit(v):
        F, mag = op.residual(v, source)
        return F, op.relative(v, F, mag)

    F, rel = merit(u)
    for it in range(opts.max_iter):
        rmax = float(rel.max())
        history.append(rmax)
        if rmax <= opts.tol:
            return u, it, rmax
        J = op.jacobian(u, source)
        Jf = J[fidx][:, fidx]
        step = np.zeros_like(u)
        step[fidx] = spsolve(Jf.tocsc(), -F[fidx])
        lam = opts.damping
        phi0 = np.linalg.norm(rel)
        accepted = False
        while lam > 1e-10:
            trial = u + lam * step
            if positive and np.any(trial[free] <= 0):
                lam *= 0.5
                continue
            Ft, relt = merit(trial)
            if np.linalg.norm(relt) <= (1 - 1e-4 * lam) * phi0 or relt.max() <= opts.tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if positive and np.any((u + 1e-10 * step)[free] <= 0):
                bad = int(fidx[np.argmin((u + 1e-10 * step)[fidx])])
                raise NegativeIterate("positivity safeguard exhausted", node=bad)
            raise NoConvergence(f"line search failed (residual {rmax:.3e})", u, history)
        u, F, rel = trial, Ft, relt
    raise NoConvergence(f"no convergence after {opts.max_iter} iterations", u, history)


def solve_grid2d(problem: ValidatedProblem, grid: Grid2D, opts: SolverOptions = SolverOptions(),
                 singular=True, initial=None) -> SolutionField2D:
    """Regularized continuation solve on a rectangle or disk grid.

    Same contract as the radial solver: ε runs along ``opts.schedule()``,
    boundary nodes carry the trace ε^(p/(γ+p-1)) (or 0), each step warm
    starts from the previous one shifted by the change of trace.
    ``singular=False`` drops u^(-γ) (torsion test hook).
    """
    if not isinstance(problem.domain, (Rectangle, Disk)):
        raise TypeError("solve_grid2d needs a Rectangle or Disk")
    if grid.domain != problem.domain:
        raise ValueError("grid was built for another domain")
    op = _Operator(grid, problem.p, problem.theta, problem.q, opts.jacobian_floor)
    schedule = opts.schedule() if singular else [opts.eps_min]
    gam, f = problem.gamma, problem.reaction
    u, tr_prev, path, total = None, None, [], 0
    for eps in schedule:
        tr = (eps ** problem.boundary_exponent
              if singular and opts.boundary_trace == "scaled" else 0.0)
        if u is None:
            u = (np.array(initial, dtype=float) if initial is not None
                 else _initial_guess2d(problem, grid, tr))
        u = u.copy()
        if tr_prev is not None:
            u -= tr_prev - tr
        tr_prev = tr
        u[grid.boundary] = tr
        u[op.free] = np.maximum(u[op.free], tr if tr > 0 else 1e-300)

        def source(v, eps=eps):
            S, dS = f(v), f.derivative(v)
            if singular:
                base = np.maximum(v + eps, 1e-300)
                S = S + base ** (-gam)
                dS = dS - gam * base ** (-gam - 1.0)
            return S, dS

        try:
            u, its, res = _newton2d(op, u, source, opts, positive=singular)
        except NoConvergence as exc:
            exc.args = (f"eps={eps:.1e}: {exc.args[0]}",)
            raise
        total += its
        path.append({"eps": eps, "trace": tr, "iterations": its, "residual": res})
        log.debug("2d eps=%.1e its=%d res=%.2e", eps, its, res)
    meta = {"problem_hash": problem.spec.content_hash(), "eps": schedule[-1],
            "trace": path[-1]["trace"], "iterations": total, "residual": path[-1]["residual"],
            "continuation": path, "singular": singular, "tol": opts.tol, "grid": grid.kind}
    return SolutionField2D.from_values(grid, u, meta)


# ---------------------------------------------------------------------------
# derivatives and oracles
# ---------------------------------------------------------------------------

def directional_derivative(field2d: SolutionField2D, x, nu, h=None):
    """Second-order estimate of ∂u/∂ν at the point ``x``.

    Central difference of the interpolated field with step h (default: a
    quarter of the local spacing).  If the central stencil would leave the
    domain, a one-sided second-order formula along +ν or -ν is used and
    the result is returned with ``one_sided=True``; if neither fits,
    TooCloseToBoundary is raised.

    Returns (value, one_sided).
    """
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    dom = field2d.domain
    d0 = float(dom.distance(x[0], x[1]))
    if d0 <= 0:
        raise TooCloseToBoundary("point is not interior")
    if h is None:
        h = 0.25 * field2d.grid.spacing
        h = min(h, 0.45 * d0) if d0 > 2 * h else h

    def inside(k):
        q = x + k * h * nu
        return dom.distance(q[0], q[1]) >= 0

    def val(ks):
        pts = np.array([x + k * h * nu for k in ks])
        return field2d.interpolate(pts[:, 0], pts[:, 1])

    if inside(-1) and inside(1):
        a, b = val([-1, 1])
        return float((b - a) / (2 * h)), False
    if inside(1) and inside(2):
        u0, u1, u2 = val([0, 1, 2])
        return float((-3 * u0 + 4 * u1 - u2) / (2 * h)), True
    if inside(-1) and inside(-2):
        u0, u1, u2 = val([0, -1, -2])
        return float((3 * u0 - 4 * u1 + u2) / (2 * h)), True
    raise TooCloseToBoundary("no second-order stencil fits inside the domain")


def torsion_series(domain: Rectangle, x, y, terms=201):
    """Solution of -Δu = 1 on the centred rectangle with zero boundary data
    (odd-mode sine series in x, closed-form hyperbolic factor in y)."""
    a, b = domain.a, domain.b
    x = np.asarray(x, dtype=float) + a / 2
    y = np.asarray(y, dtype=float)
    u = 0.5 * x * (a - x)
    for k in range(1, 2 * terms, 2):
        kk = k * np.pi / a
        coef = 4 * a * a / (k ** 3 * np.pi ** 3)
        # cosh(kk y)/cosh(kk b/2) written with decaying exponentials
        ratio = (np.exp(kk * (np.abs(y) - b / 2)) + np.exp(-kk * (np.abs(y) + b / 2))) / \
                (1 + np.exp(-kk * b))
        u = u - coef * np.sin(kk * x) * ratio
    return u
