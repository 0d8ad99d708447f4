"""Ordering checks, sub/supersolution verification and the monotonicity
inequality of the p-Laplacian flux map."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MeshMismatch
from .solver1d import RadialDiscretization

__all__ = [
    "ComparisonReport", "SandwichResult", "check_ordering", "verify_sub_super",
    "find_barrier_sandwich", "p_monotonicity_gap", "empirical_lambda",
]


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    violation_locus: int
    verdict: str
    tolerance: float
    notice: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.verdict == "ordered"

    def to_dict(self):
        out = {"max_violation": self.max_violation, "violation_locus": self.violation_locus,
               "verdict": self.verdict, "tolerance": self.tolerance}
        if self.notice:
            out["notice"] = self.notice
        out.update({k: v for k, v in self.extra.items() if np.isscalar(v)})
        return out


def _report(viol, tol, locus_map=None, notice="", **extra):
    if viol.size == 0:
        raise ValueError("no nodes left to check")
    k = int(np.argmax(viol))
    worst = float(viol[k])
    locus = int(locus_map[k]) if locus_map is not None else k
    return ComparisonReport(worst, locus, "ordered" if worst <= tol else "violated",
                            float(tol), notice, extra)


def _interior_mask(n, exclude_cells):
    mask = np.ones(n, dtype=bool)
    if exclude_cells >= 0:
        mask[:exclude_cells + 1] = False
        mask[n - exclude_cells - 1:] = False
    return mask


def check_ordering(u1, u2, tol=1e-8, exclude_cells=-1) -> ComparisonReport:
    """Is u1 ≤ u2 nodewise?  ``max_violation`` is max(u1 - u2).

    ``exclude_cells = k ≥ 0`` drops the boundary nodes and the k cells next
    to each end.  A field on another mesh of the same span is resampled
    linearly onto the nodes of ``u1``.
    """
    x1 = np.asarray(u1.mesh.nodes)
    v1 = np.asarray(u1.values, dtype=float)
    x2 = np.asarray(u2.mesh.nodes)
    v2 = np.asarray(u2.values, dtype=float)
    notice = ""
    if v1.shape != v2.shape or not np.array_equal(x1, x2):
        if x1.ndim != 1 or x2.ndim != 1 or abs(x1[0] - x2[0]) > 1e-12 or abs(x1[-1] - x2[-1]) > 1e-12:
            raise MeshMismatch("fields cover different spans")
        v2 = np.interp(x1, x2, v2)
        notice = "u2 resampled onto the mesh of u1"
    diff = (v1 - v2).ravel()
    mask = _interior_mask(diff.size, exclude_cells) if v1.ndim == 1 else np.ones(diff.size, bool)
    idx = np.flatnonzero(mask)
    return _report(diff[idx], tol, idx, notice)


# ---------------------------------------------------------------------------
# sub / super verification
# ---------------------------------------------------------------------------

_GX, _GW = np.polynomial.legendre.leggauss(10)


def _weak_terms_callable(fn, mesh, N, p, c, gamma, theta):
    """Exact-function weak form against hats: stiffness, lower-order and
    right-hand-side integrals by 10-point Gauss per cell."""
    x = mesh.nodes
    h = np.diff(x)
    t = 0.5 * (_GX + 1.0)
    w = 0.5 * _GW
    r = x[:-1, None] + h[:, None] * t[None, :]
    val = np.asarray(fn(r), dtype=float)
    der = np.asarray(fn.derivative(r), dtype=float)
    jac = r ** (N - 1) * h[:, None] * w[None, :]
    flux_avg = (jac * np.abs(der) ** (p - 2.0) * der).sum(axis=1) / h
    lower_d = theta * np.abs(der) ** p + theta
    rhs_d = c * val ** (-gamma)
    phil, phir = (1.0 - t)[None, :], t[None, :]
    n = x.size
    stiff = np.zeros(n)
    stiff[1:] += flux_avg
    stiff[:-1] -= flux_avg
    low = np.zeros(n)
    rhs = np.zeros(n)
    low[:-1] += (jac * lower_d * phil).sum(axis=1)
    low[1:] += (jac * lower_d * phir).sum(axis=1)
    rhs[:-1] += (jac * rhs_d * phil).sum(axis=1)
    rhs[1:] += (jac * rhs_d * phir).sum(axis=1)
    return stiff + low, rhs, np.asarray(fn(x), dtype=float)


def _weak_terms_nodal(fld, p, c, gamma, theta):
    disc = RadialDiscretization(fld.mesh, fld.domain)
    u = np.asarray(fld.values, dtype=float)
    with np.errstate(divide="ignore"):
        S = c * np.where(u > 0, u, np.nan) ** (-gamma)
    fl, _ = disc.flux(u, p)
    stiff = np.zeros_like(u)
    stiff[1:] += fl
    stiff[:-1] -= fl
    low = 0.0
    if theta:
        G = disc.node_gradient(u, "central")[0]
        low = disc.mass * (theta * np.abs(G) ** p + theta)
    return stiff + low, disc.mass * S, u


def verify_sub_super(c, gamma, p, theta, field, kind="super", mode="plain", tol=1e-10,
                     exclude_cells=2, mask=None, mesh=None, N=1) -> ComparisonReport:
    """Check -Δ_p w [+ θ|∇w|^p + θ] ≥ c/w^γ (``super``) or ≤ (``sub``) in
    the weak sense against nonnegative hat functions.

    ``field`` is a nodal field (SolutionField or BarrierField, P1 weak form)
    or an exact profile with ``__call__``/``derivative`` evaluated on
    ``mesh`` by Gauss quadrature.  The reported violation at node i is the
    signed defect divided by the right-hand-side integral there.  For
    ``mode="gradient"`` and ``kind="sub"`` the ceiling w ≤ (c/θ)^(1/γ) is
    also enforced.
    """
    if kind not in ("sub", "super"):
        raise ValueError("kind must be 'sub' or 'super'")
    if mode not in ("plain", "gradient"):
        raise ValueError("mode must be 'plain' or 'gradient'")
    notice = ""
    if mode == "gradient" and not theta > 0:
        notice = "theta = 0: gradient mode reduces to plain mode"
        warnings.warn(notice, stacklevel=2)
        mode = "plain"
    th = theta if mode == "gradient" else 0.0
    if hasattr(field, "values"):
        if not hasattr(field, "domain"):
            field = field.as_field()
        lhs, rhs, w = _weak_terms_nodal(field, p, c, gamma, th)
    else:
        if mesh is None:
            raise ValueError("an exact profile needs a mesh")
        lhs, rhs, w = _weak_terms_callable(field, mesh, N, p, c, gamma, th)
    n = w.size
    keep = _interior_mask(n, exclude_cells)
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    if np.any(w[keep] <= 0):
        raise DomainError("the field must be positive on the tested nodes")
    idx = np.flatnonzero(keep)
    defect = (lhs[idx] - rhs[idx]) / rhs[idx]
    viol = -defect if kind == "super" else defect
    extra = {"kind": kind, "mode": mode, "n_nodes": int(idx.size)}
    if mode == "gradient" and kind == "sub":
        ceiling = (c / theta) ** (1.0 / gamma)
        cv = float(np.max(w[idx] - ceiling))
        extra["ceiling"] = ceiling
        extra["ceiling_violation"] = cv
        viol = np.maximum(viol, (w[idx] - ceiling) / ceiling)
    return _report(viol, tol, idx, notice, **extra)


# ---------------------------------------------------------------------------
# barrier sandwich
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichResult:
    s_lower: float
    s_upper: float
    lower_ordering: ComparisonReport
    upper_ordering: ComparisonReport
    lower_inequality: ComparisonReport
    upper_inequality: ComparisonReport

    @property
    def ok(self):
        return (self.s_lower < self.s_upper and self.lower_ordering.ok and self.upper_ordering.ok
                and self.lower_inequality.ok and self.upper_inequality.ok)

    def to_dict(self):
        return {"s_lower": self.s_lower, "s_upper": self.s_upper, "ok": self.ok,
                "lower_ordering": self.lower_ordering.to_dict(),
                "upper_ordering": self.upper_ordering.to_dict(),
                "lower_inequality": self.lower_inequality.to_dict(),
                "upper_inequality": self.upper_inequality.to_dict()}


def _bisect_scale(pred, lo, hi, want_small, rtol=1e-6, max_iter=200):
    """Boundary of {s : pred(s)} between lo and hi on a log scale.

    ``want_small``: pred holds for small s (return the largest passing s);
    otherwise pred holds for large s (return the smallest passing s).
    """
    good, bad = (lo, hi) if want_small else (hi, lo)
    while not pred(good):
        good = good / 4.0 if want_small else good * 4.0
        max_iter -= 1
        if max_iter <= 0:
            raise RuntimeError("no admissible scale found")
    while pred(bad) and max_iter > 0:
        bad = bad * 4.0 if want_small else bad / 4.0
        max_iter -= 1
    for _ in range(max_iter):
        if abs(np.log(good / bad)) <= rtol:
            break
        mid = np.sqrt(good * bad)
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def find_barrier_sandwich(u, family, M=1.0, c_lower=1.0, tol=1e-8, exclude_cells=2,
                          margin=1e-3) -> SandwichResult:
    """Search scales s_lower < s_upper with w_lower ≤ u ≤ w_upper.

    ``family(s)`` returns a BarrierField.  The upper scale is the smallest s
    for which w_s is a supersolution of -Δ_p w = M/w^γ and lies above u; the
    lower scale is the largest s for which w_s is a subsolution with
    constant ``c_lower`` and lies below u.  Both are then moved by the
    relative ``margin`` into the admissible set and re-verified.
    """
    probe = family(1.0)
    gamma, p = probe.gamma, probe.eig.p

    def ineq(s, kind, c):
        return verify_sub_super(c, gamma, p, 0.0, family(s), kind, "plain", tol=0.0,
                                exclude_cells=exclude_cells)

    def upper_ok(s):
        b = family(s).as_field()
        return ineq(s, "super", M).ok and check_ordering(u, b, tol, exclude_cells).ok

    def lower_ok(s):
        b = family(s).as_field()
        return ineq(s, "sub", c_lower).ok and check_ordering(b, u, tol, exclude_cells).ok

    s_up = _bisect_scale(upper_ok, 1.0, 1.0, want_small=False) * (1 + margin)
    s_lo = _bisect_scale(lower_ok, 1.0, 1.0, want_small=True) * (1 - margin)
    w_up, w_lo = family(s_up).as_field(), family(s_lo).as_field()
    return SandwichResult(
        s_lo, s_up,
        check_ordering(w_lo, u, tol, exclude_cells), check_ordering(u, w_up, tol, exclude_cells),
        verify_sub_super(c_lower, gamma, p, 0.0, family(s_lo), "sub", "plain", 0.0, exclude_cells),
        verify_sub_super(M, gamma, p, 0.0, family(s_up), "super", "plain", 0.0, exclude_cells),
    )


# ---------------------------------------------------------------------------
# monotonicity inequality of the flux map
# ---------------------------------------------------------------------------

def p_monotonicity_gap(xi, xi2, p):
    """lhs = ⟨|ξ|^(p-2)ξ - |ξ'|^(p-2)ξ', ξ - ξ'⟩, rhs = (|ξ|+|ξ'|)^(p-2)|ξ-ξ'|².

    Vectorized over leading axes; ratio = lhs/rhs (+inf where ξ = ξ').
    """
    a = np.atleast_1d(np.asarray(xi, dtype=float))
    b = np.atleast_1d(np.asarray(xi2, dtype=float))
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    if np.any((na + nb) == 0):
        raise DomainError("both vectors vanish")
    with np.errstate(divide="ignore", invalid="ignore"):
        fa = np.where(na > 0, na ** (p - 2.0), 0.0)[..., None] * a
        fb = np.where(nb > 0, nb ** (p - 2.0), 0.0)[..., None] * b
    diff = a - b
    lhs = np.sum((fa - fb) * diff, axis=-1)
    dd = np.sum(diff * diff, axis=-1)
    rhs = (na + nb) ** (p - 2.0) * dd
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dd > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.inf)
    if np.ndim(xi) <= 1 and np.ndim(xi2) <= 1:
        return float(lhs), float(rhs), float(ratio)
    return lhs, rhs, ratio


def _unit_ball(rng, n, dim):
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.random((n, 1)) ** (1.0 / dim)


def empirical_lambda(p, dim=2, n_samples=100_000, seed=0, chunks=8, workers=1):
    """Minimum of lhs/rhs over random pairs in the unit ball.

    Chunks draw from independent generators spawned from ``seed`` and are
    reduced in chunk order, so the result does not depend on ``workers``.
    """
    seqs = np.random.SeedSequence(seed).spawn(chunks)
    sizes = [n_samples // chunks + (1 if k < n_samples % chunks else 0) for k in range(chunks)]

    def one(k):
        rng = np.random.default_rng(seqs[k])
        a = _unit_ball(rng, sizes[k], dim)
        b = _unit_ball(rng, sizes[k], dim)
        lhs, _, ratio = p_monotonicity_gap(a, b, p)
        return float(np.min(ratio)), float(np.min(lhs))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(one, range(chunks)))
    else:
        parts = [one(k) for k in range(chunks)]
    return min(r for r, _ in parts), min(m for _, m in parts)
