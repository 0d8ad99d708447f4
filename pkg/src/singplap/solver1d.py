"""Regularized continuation solver for the 1D / radial problem.

The radial form of the equation on an interval, annulus or ball is

    -r^(1-N) (r^(N-1) |u'|^(p-2) u')' + θ |u'|^q = (u + ε)^(-γ) + f(u),

discretized with P1 finite elements on a graded mesh: the flux integral is
exact for piecewise linear u, lower-order terms are mass lumped.  The
singular term is regularized by ε and ε is driven to ``eps_min`` along a
geometric continuation schedule with warm starts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import MeshMismatch, NegativeIterate, NoConvergence
from .fields import SolutionField, distance_on_mesh
from .mesh import Mesh1D, nodal_gradient
from .problem import Annulus, Ball, Interval, Regime, ValidatedProblem

__all__ = [
    "SolverOptions", "RadialDiscretization", "WeakResidual", "solve_radial",
    "solve_with_source", "weak_residual", "refine_and_resolve", "initial_guess",
    "halfspace_amplitude",
]

log = logging.getLogger(__name__)

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class SolverOptions:
    eps0: float = 1e-2
    eps_factor: float = 0.1
    eps_min: float = 1e-10
    damping: float = 1.0
    max_iter: int = 200
    tol: float = 1e-10
    gradient: str = "central"          # or "upwind"
    boundary_trace: str = "scaled"     # eps**(p/(γ+p-1)) on ∂Ω, or "zero"
    jacobian_floor: float = 1e-14
    picard_iters: int = 30

    def __post_init__(self):
        if not self.eps0 > self.eps_min > 0:
            raise ValueError("need eps0 > eps_min > 0")
        if not 0 < self.eps_factor < 1:
            raise ValueError("eps_factor must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.gradient not in ("central", "upwind"):
            raise ValueError("gradient must be 'central' or 'upwind'")
        if self.boundary_trace not in ("scaled", "zero"):
            raise ValueError("boundary_trace must be 'scaled' or 'zero'")

    def schedule(self):
        eps, out = self.eps0, []
        while eps > self.eps_min * (1 + 1e-9):
            out.append(eps)
            eps *= self.eps_factor
        out.append(self.eps_min)
        return out


def halfspace_amplitude(p, gamma):
    """A with A t^m solving -(|u'|^(p-2)u')' = u^(-γ) on (0, ∞), m = p/(γ+p-1)."""
    return ((gamma + p - 1.0) ** p / (p ** (p - 1.0) * (p - 1.0) * (gamma - 1.0))) ** (
        1.0 / (gamma + p - 1.0))


def _dimension(domain):
    if isinstance(domain, Interval):
        return 1
    if isinstance(domain, (Annulus, Ball)):
        return domain.N
    raise TypeError(f"{type(domain).__name__} is not a 1D/radial domain")


class RadialDiscretization:
    """Geometric weights of the P1 weak form on a 1D/radial mesh."""

    def __init__(self, mesh: Mesh1D, domain):
        self.mesh = mesh
        self.domain = domain
        x = mesh.nodes
        self.x = x
        self.h = np.diff(x)
        N = _dimension(domain)
        self.N = N
        # ω_c = (1/h) ∫_cell r^(N-1) dr
        if N == 1:
            self.omega = np.ones_like(self.h)
        else:
            self.omega = (x[1:] ** N - x[:-1] ** N) / (N * self.h)
        # lumped mass m_i = ∫ φ_i r^(N-1) dr (Gauss, exact for the polynomial weight)
        t = 0.5 * (_GAUSS_X + 1.0)
        w = 0.5 * _GAUSS_W
        r = x[:-1, None] + self.h[:, None] * t[None, :]
        rw = r ** (N - 1) * w[None, :] * self.h[:, None]
        left = (rw * (1.0 - t)[None, :]).sum(axis=1)   # share of cell c to node c
        right = (rw * t[None, :]).sum(axis=1)          # share to node c+1
        m = np.zeros_like(x)
        m[:-1] += left
        m[1:] += right
        self.mass = m
        free = np.ones(x.size, dtype=bool)
        free[-1] = False
        if not isinstance(domain, Ball):
            free[0] = False
        self.free = free
        self.center_node = isinstance(domain, Ball)

    # -- gradient samples used by the θ|u'|^q term ----------------------------
    def node_gradient(self, u, mode):
        """Return (G, dG/du_{i-1}, dG/du_i, dG/du_{i+1}) at every node."""
        x, n = self.x, u.size
        G = np.zeros(n)
        dl, dc, dr = np.zeros(n), np.zeros(n), np.zeros(n)
        hm = x[1:-1] - x[:-2]
        hp = x[2:] - x[1:-1]
        if mode == "central":
            cl = -hp / (hm * (hm + hp))
            cc = (hp - hm) / (hm * hp)
            cr = hm / (hp * (hm + hp))
            G[1:-1] = cl * u[:-2] + cc * u[1:-1] + cr * u[2:]
            dl[1:-1], dc[1:-1], dr[1:-1] = cl, cc, cr
        else:
            a = (u[1:-1] - u[:-2]) / hm
            b = (u[2:] - u[1:-1]) / hp
            ap = np.maximum(a, 0.0)
            bm = -np.minimum(b, 0.0)
            use_a = ap >= bm
            G[1:-1] = np.where(use_a, ap, bm)
            on_a = use_a & (a > 0)
            on_b = (~use_a) & (b < 0)
            dl[1:-1] = np.where(on_a, -1.0 / hm, 0.0)
            dc[1:-1] = np.where(on_a, 1.0 / hm, 0.0) + np.where(on_b, 1.0 / hp, 0.0)
            dr[1:-1] = np.where(on_b, -1.0 / hp, 0.0)
        # ball centre: u'(0) = 0 by symmetry; outer nodes are Dirichlet.
        return G, dl, dc, dr

    # -- residual ---------------------------------------------------------------
    def flux(self, u, p):
        g = np.diff(u) / self.h
        return self.omega * np.sign(g) * np.abs(g) ** (p - 1.0), g

    def residual(self, u, p, theta, q, source, gradient="central"):
        """Nodal weak residual F and a per-node magnitude scale.

        ``source(u)`` returns (S, dS/du) with S the right-hand side density.
        """
        fl, _ = self.flux(u, p)
        F = np.zeros_like(u)
        F[1:] += fl
        F[:-1] -= fl
        S, _ = source(u)
        mag = np.abs(F) * 0.0
        mag[1:] += np.abs(fl)
        mag[:-1] += np.abs(fl)
        if theta:
            G = self.node_gradient(u, gradient)[0]
            hj = theta * np.abs(G) ** q
            F += self.mass * hj
            mag += self.mass * hj
        F -= self.mass * S
        mag += self.mass * np.abs(S)
        return F, mag

    def rounding_floor(self, u, p):
        """Size of the floating-point noise in the flux differences at each node."""
        g = np.diff(u) / self.h
        dg = 16.0 * np.finfo(float).eps * np.maximum(np.abs(u[1:]), np.abs(u[:-1])) / self.h
        noise = self.omega * max(p - 1.0, 1.0) * np.maximum(np.abs(g), dg) ** (p - 2.0) * dg
        out = np.zeros_like(u)
        out[1:] += noise
        out[:-1] += noise
        return out

    def relative(self, u, p, F, mag):
        """Per-node residual relative to the size of the terms it balances,
        after discounting rounding noise (free nodes only)."""
        fl = self.rounding_floor(u, p)
        f = self.free
        return np.maximum(np.abs(F[f]) - fl[f], 0.0) / (mag[f] + 1e-300)

    def jacobian(self, u, p, theta, q, source, gradient, floor):
        """Tridiagonal Jacobian in ``solve_banded`` layout (full size)."""
        n = u.size
        g = np.diff(u) / self.h
        coef = (p - 1.0) * np.abs(g) ** (p - 2.0) if p != 2 else np.ones_like(g)
        if p < 2:
            coef = (p - 1.0) * np.maximum(np.abs(g), floor ** (1.0 / (2.0 - p))) ** (p - 2.0)
        coef = np.maximum(coef, floor)
        k = self.omega * coef / self.h
        ab = np.zeros((3, n))
        diag = np.zeros(n)
        diag[1:] += k
        diag[:-1] += k
        sup = np.zeros(n)
        sub = np.zeros(n)
        sup[:-1] = -k      # dF_i/du_{i+1}
        sub[1:] = -k       # dF_i/du_{i-1}
        if theta:
            G, dl, dc, dr = self.node_gradient(u, gradient)
            Ga = np.maximum(np.abs(G), floor)
            dh = theta * q * Ga ** (q - 1.0) * np.sign(G) * self.mass
            sub += dh * dl
            diag += dh * dc
            sup += dh * dr
        _, dS = source(u)
        diag -= self.mass * dS
        ab[0, 1:] = sup[:-1]
        ab[1] = diag
        ab[2, :-1] = sub[1:]
        return ab

    def solve_free(self, ab, rhs):
        """Solve J δ = rhs on the free nodes (Dirichlet rows removed)."""
        idx = np.flatnonzero(self.free)
        lo, hi = idx[0], idx[-1] + 1
        sub = ab[:, lo:hi].copy()
        # decouple from fixed neighbours
        sub[0, 0] = 0.0
        sub[2, -1] = 0.0
        return lo, hi, solve_banded((1, 1), sub, rhs[lo:hi])


@dataclass
class _SolveInfo:
    iterations: int = 0
    picard_steps: int = 0
    residual: float = np.inf
    history: list = field(default_factory=list)


def _nonlinear_solve(disc, u0, p, theta, q, source, opts, positive=True):
    """Damped Newton with Armijo backtracking; Picard (lagged diffusion) when
    the line search stalls."""
    u = u0.copy()
    info = _SolveInfo()
    free = disc.free

    def merit(v):
        F, mag = disc.residual(v, p, theta, q, source, opts.gradient)
        return F, disc.relative(v, p, F, mag)

    F, rel = merit(u)
    picard_left = 0
    for it in range(opts.max_iter):
        rmax = rel.max()
        info.history.append(float(rmax))
        if rmax <= opts.tol:
            info.iterations = it
            info.residual = float(rmax)
            return u, info
        use_picard = picard_left > 0
        if use_picard:
            step = _picard_step(disc, u, p, theta, q, source, opts) - u
            picard_left -= 1
            info.picard_steps += 1
        else:
            ab = disc.jacobian(u, p, theta, q, source, opts.gradient, opts.jacobian_floor)
            lo, hi, d = disc.solve_free(ab, -F)
            step = np.zeros_like(u)
            step[lo:hi] = d
        lam = opts.damping
        phi0 = np.linalg.norm(rel)
        accepted = False
        while lam > 1e-10:
            trial = u + lam * step
            if positive and np.any(trial[free] <= 0):
                lam *= 0.5
                continue
            Ft, relt = merit(trial)
            if use_picard or np.linalg.norm(relt) <= (1 - 1e-4 * lam) * phi0 or relt.max() <= opts.tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if positive and np.any((u + 1e-10 * step)[free] <= 0):
                bad = int(np.flatnonzero(free)[np.argmin((u + 1e-10 * step)[free])])
                raise NegativeIterate("positivity safeguard exhausted", node=bad)
            if use_picard:
                raise NoConvergence("Picard fallback failed to make progress", u, info.history)
            picard_left = opts.picard_iters
            continue
        u, F, rel = trial, Ft, relt
    info.iterations = opts.max_iter
    info.residual = float(rel.max())
    raise NoConvergence(
        f"no convergence after {opts.max_iter} iterations (residual {rel.max():.3e})",
        u, info.history)


def _picard_step(disc, u, p, theta, q, source, opts):
    """One lagged-coefficient step: diffusion coefficient and gradient term
    frozen at u, source linearized."""
    g = np.diff(u) / disc.h
    coef = np.maximum(np.abs(g), opts.jacobian_floor) ** (p - 2.0)
    k = disc.omega * coef / disc.h
    n = u.size
    diag = np.zeros(n)
    diag[1:] += k
    diag[:-1] += k
    S, dS = source(u)
    dSn = np.minimum(dS, 0.0)   # only the stabilizing part goes implicit
    rhs = disc.mass * (S - dSn * u)
    if theta:
        G = disc.node_gradient(u, opts.gradient)[0]
        rhs -= disc.mass * theta * np.abs(G) ** q
    diag -= disc.mass * dSn
    ab = np.zeros((3, n))
    ab[0, 1:] = -k
    ab[1] = diag
    ab[2, :-1] = -k
    # move fixed boundary values to the right-hand side
    fixed = ~disc.free
    rhs = rhs.copy()
    for i in np.flatnonzero(fixed):
        if i - 1 >= 0:
            rhs[i - 1] += k[i - 1] * u[i]
        if i + 1 < n:
            rhs[i + 1] += k[i] * u[i]
    lo, hi, d = disc.solve_free(ab, rhs)
    out = u.copy()
    out[lo:hi] = d
    return out


def initial_guess(problem: ValidatedProblem, mesh: Mesh1D, trace=0.0):
    """Barrier-shaped starting iterate: A·(d - d²/(2ρ))^m plus the trace."""
    dom = problem.domain
    d = distance_on_mesh(dom, mesh.nodes)
    rho = dom.inradius
    deff = np.clip(d - d * d / (2 * rho), 0.0, None)
    if problem.regime is Regime.STRONG:
        m = problem.boundary_exponent
        A = halfspace_amplitude(problem.p, problem.gamma)
    else:
        m, A = 1.0, 1.0
    return trace + A * deff ** m


def _singular_source(problem, eps, singular=True, coeff=1.0):
    gam, f = problem.gamma, problem.reaction

    def source(u):
        S = f(u)
        dS = f.derivative(u)
        if singular:
            base = np.maximum(u + eps, 1e-300)
            S = S + coeff * base ** (-gam)
            dS = dS - coeff * gam * base ** (-gam - 1.0)
        return S, dS

    return source


def _trace(problem, eps, opts, singular):
    if not singular or opts.boundary_trace == "zero":
        return 0.0
    return eps ** problem.boundary_exponent


def solve_radial(problem: ValidatedProblem, mesh: Mesh1D, opts: SolverOptions = SolverOptions(),
                 initial=None, singular=True, coeff=1.0) -> SolutionField:
    """Solve the regularized radial problem along the ε-continuation schedule.

    ``singular=False`` drops the u^(-γ) term (a test hook: with a constant
    reaction it yields the torsion problem).  ``initial`` warm-starts the
    first continuation step.  ``coeff`` multiplies the singular term.
    """
    if problem.domain.dim not in (1,) and not isinstance(problem.domain, (Annulus, Ball)):
        raise TypeError("solve_radial needs an Interval, Annulus or Ball")
    disc = RadialDiscretization(mesh, problem.domain)
    schedule = opts.schedule() if singular else [opts.eps_min]
    if initial is not None and not isinstance(initial, np.ndarray):
        initial = np.asarray(initial.values, dtype=float)
        schedule = [opts.eps_min]
    u = None
    path = []
    total = 0
    tr_prev = None
    for eps in schedule:
        tr = _trace(problem, eps, opts, singular)
        if u is None:
            u = (np.array(initial, dtype=float) if initial is not None
                 else initial_guess(problem, mesh, tr))
        u = u.copy()
        if tr_prev is not None:
            u -= tr_prev - tr      # shift keeps the profile, lowers the trace
        tr_prev = tr
        u[~disc.free] = tr
        u[disc.free] = np.maximum(u[disc.free], tr if tr > 0 else 1e-300)
        source = _singular_source(problem, eps, singular, coeff)
        try:
            u, info = _nonlinear_solve(disc, u, problem.p, problem.theta, problem.q,
                                       source, opts, positive=singular)
        except NoConvergence as exc:
            exc.args = (f"eps={eps:.1e}: {exc.args[0]}",)
            raise
        total += info.iterations
        path.append({"eps": eps, "trace": tr, "iterations": info.iterations,
                     "picard_steps": info.picard_steps, "residual": info.residual})
        log.debug("eps=%.1e trace=%.3e its=%d res=%.2e", eps, tr, info.iterations, info.residual)
    meta = {
        "problem_hash": problem.spec.content_hash(),
        "eps": schedule[-1],
        "trace": path[-1]["trace"],
        "iterations": total,
        "residual": path[-1]["residual"],
        "continuation": path,
        "singular": singular,
        "gradient": opts.gradient,
        "tol": opts.tol,
        "coeff": coeff,
    }
    return SolutionField.from_values(mesh, u, problem.domain, meta)


def solve_with_source(mesh, domain, p, rhs, opts: SolverOptions = SolverOptions(), initial=None):
    """Solve -Δ_p w = rhs (fixed nodal density) with w = 0 on the boundary."""
    disc = RadialDiscretization(mesh, domain)
    rhs = np.asarray(rhs, dtype=float)
    zeros = np.zeros_like(rhs)

    def source(u):
        return rhs, zeros

    if initial is None:
        d = distance_on_mesh(domain, mesh.nodes)
        initial = d * (1.0 - d / (2 * domain.inradius)) + 1e-300
    u = np.array(initial, dtype=float)
    u[~disc.free] = 0.0
    u, info = _nonlinear_solve(disc, u, p, 0.0, 1.0, source, opts, positive=False)
    return u, info


@dataclass(frozen=True)
class WeakResidual:
    max_norm: float
    l2_norm: float
    relative_max: float
    nodal: np.ndarray


def weak_residual(problem: ValidatedProblem, field: SolutionField, eps=None, singular=None,
                  gradient=None) -> WeakResidual:
    """Weak-form residual of ``field`` against interior hat functions.

    Regularization, singular-term switch and gradient stencil default to the
    values recorded by the solver in ``field.meta``.
    """
    if field.domain != problem.domain:
        raise MeshMismatch("field lives on a different domain")
    disc = RadialDiscretization(field.mesh, problem.domain)
    if eps is None:
        eps = field.meta.get("eps", 0.0)
    if singular is None:
        singular = field.meta.get("singular", True)
    if gradient is None:
        gradient = field.meta.get("gradient", "central")
    u = np.array(field.values)
    F, mag = disc.residual(u, problem.p, problem.theta, problem.q,
                           _singular_source(problem, eps, singular, field.meta.get("coeff", 1.0)),
                           gradient)
    F[~disc.free] = 0.0
    rel = disc.relative(u, problem.p, F, mag)
    return WeakResidual(float(np.abs(F).max()), float(np.linalg.norm(F)),
                        float(rel.max()), F)


def refine_and_resolve(problem: ValidatedProblem, field: SolutionField, levels: int,
                       opts: SolverOptions = SolverOptions(), singular=None):
    """Re-solve on successively bisected meshes, warm-started by interpolation."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if singular is None:
        singular = field.meta.get("singular", True)
    out = []
    cur = field
    for _ in range(levels):
        mesh = cur.mesh.refine()
        guess = np.interp(mesh.nodes, cur.x, cur.values)
        cur = solve_radial(problem, mesh, replace(opts), initial=guess, singular=singular) \
            if not singular else _warm_solve(problem, mesh, opts, guess)
        out.append(cur)
    return out


def _warm_solve(problem, mesh, opts, guess):
    # a warm start is already close to the ε_min solution: skip the schedule
    warm = replace(opts, eps0=opts.eps_min * 10.0, eps_factor=0.1)
    return solve_radial(problem, mesh, warm, initial=guess)
