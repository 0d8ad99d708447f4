"""Explicit barrier functions and the exponential change of variable.

Every barrier is built from the first eigenpair (λ₁, φ₁):

* strong singularity (γ > 1):  w_s = s φ₁^m,  m = p/(γ+p-1)
* critical case (γ = 1):       w_s = s φ₁ (1 - ln φ₁)^(1/p)
* weak singularity (γ < 1):    v_s = s φ₁

For each family ``coeff_a`` is the function a with -Δ_p w = a / w^γ and
``coeff_b`` the function b with -Δ_p w + θ|∇w|^p + θ = b / w^γ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .eigen import Eigenpair
from .errors import DomainError, NormalizationError, RegimeError
from .fields import SolutionField
from .problem import Annulus, ProblemSpec, ReactionSpec, Regime, classify_regime, validate_problem
from .solver1d import SolverOptions, halfspace_amplitude, solve_radial

__all__ = [
    "PowerProfile", "BarrierField", "TransformPair", "halfspace_profile",
    "barrier_power_eig", "barrier_log_eig", "barrier_linear_eig",
    "chain_rule_coefficient", "divergence_coefficient", "annulus_profile",
    "exp_transform", "inverse_exp_transform", "wcp_nonlinearity",
    "wcp_derivative", "wcp_threshold",
]


# ---------------------------------------------------------------------------
# half-space profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerProfile:
    """u(t) = A t^m, the positive solution of -(|u'|^(p-2)u')' = u^(-γ) on (0, ∞)."""

    A: float
    m: float
    p: float
    gamma: float

    def __call__(self, t):
        return self.A * np.asarray(t, dtype=float) ** self.m

    def derivative(self, t):
        return self.A * self.m * np.asarray(t, dtype=float) ** (self.m - 1.0)

    def ode_residual(self, t):
        """|-(p-1)|u'|^(p-2) u'' - u^(-γ)| / u^(-γ) at ``t``."""
        t = np.asarray(t, dtype=float)
        A, m, p, g = self.A, self.m, self.p, self.gamma
        du = A * m * t ** (m - 1.0)
        d2u = A * m * (m - 1.0) * t ** (m - 2.0)
        lhs = -(p - 1.0) * np.abs(du) ** (p - 2.0) * d2u
        rhs = (A * t ** m) ** (-g)
        return np.abs(lhs - rhs) / rhs

    def limit_constant(self, beta=1.0):
        """Predicted limit of d^((γ-1)/(γ+p-1)) ∂u/∂ν for ⟨ν, η⟩ = β."""
        return self.A * self.m * beta


def halfspace_profile(p, gamma) -> PowerProfile:
    if not p > 1:
        raise DomainError("p must exceed 1")
    if not gamma > 1:
        raise RegimeError("the half-space power profile needs gamma > 1")
    return PowerProfile(halfspace_amplitude(p, gamma), p / (gamma + p - 1.0), p, gamma)


# ---------------------------------------------------------------------------
# eigenfunction barriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BarrierField:
    values: np.ndarray
    coeff_a: np.ndarray
    coeff_b: np.ndarray
    s: float
    regime: Regime
    family: str
    eig: Eigenpair
    gamma: float
    extra: dict = field(default_factory=dict)

    @property
    def mesh(self):
        return self.eig.mesh

    def as_field(self):
        return SolutionField.from_values(self.eig.mesh, self.values, self.eig.phi1.domain,
                                         {"barrier": self.family, "s": self.s})


def _eig_arrays(eig):
    phi = np.clip(np.asarray(eig.values, dtype=float), 0.0, None)
    dphi = np.abs(np.asarray(eig.grad_phi1, dtype=float))
    return phi, dphi


def barrier_power_eig(s, p, gamma, eig: Eigenpair, theta=0.0) -> BarrierField:
    """w_s = s φ₁^m for γ > 1."""
    if not gamma > 1:
        raise RegimeError("the power barrier needs gamma > 1")
    if not s > 0:
        raise DomainError("s must be positive")
    lam = eig.lambda1
    phi, dphi = _eig_arrays(eig)
    k = gamma + p - 1.0
    m = p / k
    w = s * phi ** m
    bracket = lam * phi ** p + (gamma - 1.0) * (p - 1.0) / k * dphi ** p
    a = s ** k * m ** (p - 1.0) * bracket
    # θ(|∇w|^p + 1) w^γ, with |∇w|^p w^γ simplified to stay finite on ∂Ω
    b = a + theta * (s ** (p + gamma) * m ** p * phi ** m * dphi ** p + s ** gamma * phi ** (m * gamma))
    b_disp = (s ** k * m ** (p - 1.0) * (lam * phi ** p + (theta * s * p / k * phi ** p
                                                          + (gamma - 1.0) * (p - 1.0) / k) * dphi ** p)
              + theta * s ** gamma * phi ** (gamma * p / k))
    return BarrierField(w, a, b, s, Regime.STRONG, "power", eig, gamma,
                        {"bracket": bracket, "coeff_b_displayed": b_disp, "m": m})


def barrier_linear_eig(s, p, gamma, theta, eig: Eigenpair) -> BarrierField:
    """v_s = s φ₁ for 0 < γ < 1; ``coeff_b`` is the lower-barrier function d_s."""
    if not 0 < gamma < 1:
        raise RegimeError("the linear barrier needs 0 < gamma < 1")
    if not s > 0:
        raise DomainError("s must be positive")
    lam = eig.lambda1
    phi, dphi = _eig_arrays(eig)
    v = s * phi
    h = lam * s ** (p + gamma - 1.0) * phi ** (p + gamma - 1.0)
    d = (h + theta * s ** (p + gamma) * phi ** gamma * dphi ** p
         + theta * s ** gamma * phi ** gamma)
    return BarrierField(v, h, d, s, Regime.WEAK, "linear", eig, gamma, {})


def _log_factor_terms(phi, p):
    """z = (1 - ln φ)^(1/p) and z^(-p), with the φ → 0 limits handled."""
    with np.errstate(divide="ignore"):
        L = 1.0 - np.log(np.where(phi > 0, phi, 1.0))
    z = np.where(phi > 0, L ** (1.0 / p), np.inf)
    zmp = np.where(phi > 0, 1.0 / L, 0.0)
    return z, zmp


def barrier_log_eig(s, p, theta, q, eig: Eigenpair, rtol=1e-8) -> BarrierField:
    """w_s = s φ₁ (1 - ln φ₁)^(1/p) for γ = 1.

    ``coeff_a`` is the chain-rule recomputation (normative); the closed-form
    display is kept in ``extra["coeff_a_displayed"]`` and the worst relative
    disagreement in ``extra["coeff_a_mismatch"]``.
    """
    if not s > 0:
        raise DomainError("s must be positive")
    phi, dphi = _eig_arrays(eig)
    if abs(phi.max() - 1.0) > 1e-12:
        raise NormalizationError(f"sup φ₁ = {phi.max()!r}, expected 1")
    lam = eig.lambda1
    z, zmp = _log_factor_terms(phi, p)
    inner = phi > 0
    # φ z (z - z^(1-p)/p)^k -> 0 on ∂Ω for every k > 0
    phiz = np.where(inner, phi * np.where(inner, z, 0.0), 0.0)
    gprime = np.where(inner, np.where(inner, z, 1.0) * (1.0 - zmp / p), np.inf)
    t1 = np.where(inner, np.where(inner, z, 0.0) * np.where(inner, gprime, 0.0) ** (p - 1.0)
                  * lam * phi ** p, 0.0)
    t2 = (p - 1.0) / p * (1.0 - zmp / p) ** (p - 2.0) * (1.0 + (p - 1.0) / p * zmp) * dphi ** p
    a_disp = s ** p * (t1 + t2)
    a_chain = chain_rule_coefficient("log", s, p, 1.0, eig)
    w = s * phiz
    gp = np.where(inner, gprime, 0.0)
    grad_w_p_times_w = np.where(inner, s ** (p + 1.0) * gp ** p * dphi ** p * phiz, 0.0)
    b = a_chain + theta * (grad_w_p_times_w + w)
    b_disp = a_disp + theta * s ** (q + 1.0) * phiz * gp ** q * dphi ** q
    scale = np.maximum(np.abs(a_chain), 1e-300)
    mismatch = float(np.max(np.abs(a_chain - a_disp)[inner] / scale[inner])) if inner.any() else 0.0
    return BarrierField(w, a_chain, b, s, Regime.CRITICAL, "log", eig, 1.0, {
        "coeff_a_displayed": a_disp, "coeff_a_mismatch": mismatch,
        "coeff_a_agrees": mismatch <= rtol, "coeff_b_displayed": b_disp,
        "bracket_terms": (t1, t2), "z": z,
    })


# ---------------------------------------------------------------------------
# independent recomputations of a_s
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _profile_derivatives(family, p, gamma):
    """Symbolic G, G', G'' for w = s G(φ), compiled to numpy."""
    import sympy as sp

    t = sp.symbols("t", positive=True)
    P, Gm = sp.nsimplify(p), sp.nsimplify(gamma)
    if family == "power":
        G = t ** (P / (Gm + P - 1))
    elif family == "log":
        G = t * (1 - sp.log(t)) ** (1 / P)
    elif family == "linear":
        G = t
    else:
        raise ValueError(family)
    d1 = sp.diff(G, t)
    d2 = sp.diff(d1, t)
    return tuple(sp.lambdify(t, e, "numpy") for e in (G, d1, d2))


def chain_rule_coefficient(family, s, p, gamma, eig: Eigenpair):
    """a = w^γ (-Δ_p w) with w = s G(φ₁), using symbolic G', G'' and the
    eigen-equation -Δ_p φ₁ = λ₁ φ₁^(p-1):

        -Δ_p w = s^(p-1) [G'^(p-1) λ₁ φ₁^(p-1) - (p-1) G'^(p-2) G'' |∇φ₁|^p].

    Boundary nodes (φ₁ = 0) are filled with their interior limit by linear
    extrapolation in φ₁.
    """
    G, d1, d2 = _profile_derivatives(family, float(p), float(gamma))
    phi, dphi = _eig_arrays(eig)
    inner = phi > 0
    out = np.zeros_like(phi)
    f = phi[inner]
    g1 = np.broadcast_to(np.asarray(d1(f), dtype=float), f.shape)
    g2 = np.broadcast_to(np.asarray(d2(f), dtype=float), f.shape)
    w = s * np.broadcast_to(np.asarray(G(f), dtype=float), f.shape)
    lap = s ** (p - 1.0) * (g1 ** (p - 1.0) * eig.lambda1 * f ** (p - 1.0)
                            - (p - 1.0) * g1 ** (p - 2.0) * g2 * dphi[inner] ** p)
    out[inner] = w ** gamma * lap
    if (~inner).any() and inner.sum() >= 2:
        # interior limit at φ₁ = 0 from the two nearest samples
        idx = np.flatnonzero(inner)
        for b in np.flatnonzero(~inner):
            near = idx[np.argsort(np.abs(idx - b))[:2]]
            f0, f1 = phi[near]
            a0, a1 = out[near]
            out[b] = a0 - f0 * (a1 - a0) / (f1 - f0) if f1 != f0 else a0
    return out


def divergence_coefficient(barrier: BarrierField, p):
    """a = w^γ (-Δ_p w) with the p-flux built from exact chain-rule
    derivatives of w and differentiated numerically on the mesh.

    Second-order consistent; near ∂Ω the error grows like (h/d)² because
    w is singular there.
    """
    from .mesh import nodal_gradient
    from .solver1d import _dimension

    eig = barrier.eig
    G, d1, _ = _profile_derivatives(barrier.family, float(p), float(barrier.gamma))
    phi = np.clip(eig.values, 0.0, None)
    inner = phi > 0
    r = eig.mesh.nodes
    N = _dimension(eig.phi1.domain)
    dw = np.zeros_like(phi)
    dw[inner] = barrier.s * np.asarray(d1(phi[inner]), dtype=float) * eig.grad_phi1[inner]
    with np.errstate(divide="ignore", invalid="ignore"):
        flux = np.where(dw != 0, r ** (N - 1) * np.abs(dw) ** (p - 2.0) * dw, 0.0)
    div = nodal_gradient(r, flux)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = -div / np.where(r > 0, r ** (N - 1), 1.0)
    out = np.full_like(phi, np.nan)
    out[inner] = barrier.values[inner] ** barrier.gamma * lap[inner]
    return out


# ---------------------------------------------------------------------------
# annulus profile
# ---------------------------------------------------------------------------

def annulus_profile(M, gamma, p, r1, r2, N, mesh, opts: SolverOptions = SolverOptions()) -> SolutionField:
    """Radial solution U of -Δ_p U = M U^(-γ) on {r1 < |x| < r2}, 0 < γ < 1.

    ``meta`` gains the mesh-computed constants c, C of c·dist ≤ U ≤ C·dist.
    """
    if not 0 < gamma < 1:
        raise RegimeError("the annulus profile is used for 0 < gamma < 1")
    if not M > 0:
        raise DomainError("M must be positive")
    prob = validate_problem(ProblemSpec(p=p, gamma=gamma, domain=Annulus(r1, r2, N),
                                        reaction=ReactionSpec.zero()))
    U = solve_radial(prob, mesh, opts, coeff=M)
    d = prob.domain.distance_radial(U.x)
    inner = d > 0
    ratio = U.values[inner] / d[inner]
    return SolutionField(U.mesh, U.values, U.gradient, U.domain,
                         {**U.meta, "M": M, "c": float(ratio.min()), "C": float(ratio.max())})


# ---------------------------------------------------------------------------
# exponential change of variable and the auxiliary nonlinearity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformPair:
    theta: float
    p: float

    def forward(self, u):
        return np.exp(-self.theta * np.asarray(u, dtype=float) / (self.p - 1.0))

    def inverse(self, v):
        return -(self.p - 1.0) / self.theta * np.log(np.asarray(v, dtype=float))


def _transform(theta, p):
    if not theta > 0:
        raise RegimeError("the exponential transform needs theta > 0")
    return TransformPair(float(theta), float(p))


def exp_transform(field: SolutionField, theta, p) -> SolutionField:
    """v = exp(-θ u/(p-1)) nodewise."""
    tp = _transform(theta, p)
    if np.any(field.values < 0):
        raise DomainError("the transform is applied to nonnegative fields")
    return SolutionField.from_values(field.mesh, tp.forward(field.values), field.domain,
                                     {**field.meta, "transform": "exp", "theta": theta})


def inverse_exp_transform(field: SolutionField, theta, p) -> SolutionField:
    tp = _transform(theta, p)
    if np.any(field.values <= 0) or np.any(field.values > 1):
        raise DomainError("inverse transform needs values in (0, 1]")
    return SolutionField.from_values(field.mesh, tp.inverse(field.values), field.domain,
                                     {**field.meta, "transform": None})


def wcp_threshold(c, theta, gamma, p):
    """t* = exp(-(θ/(p-1)) (c/θ)^(1/γ)), the zero of the auxiliary nonlinearity."""
    return float(np.exp(-(theta / (p - 1.0)) * (c / theta) ** (1.0 / gamma)))


def wcp_nonlinearity(t, c, theta, gamma, p):
    """f(t) = (θt/(p-1))^(p-1) [c / (-(p-1)/θ · ln t)^γ - θ] on 0 < t < 1.

    Returns (value, t*).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0) or np.any(t_arr >= 1):
        raise DomainError("t must lie in (0, 1)")
    if not (c > 0 and theta > 0):
        raise DomainError("c and theta must be positive")
    u = -(p - 1.0) / theta * np.log(t_arr)
    val = (theta * t_arr / (p - 1.0)) ** (p - 1.0) * (c / u ** gamma - theta)
    return (float(val) if np.ndim(t) == 0 else val), wcp_threshold(c, theta, gamma, p)


def wcp_derivative(t, c, theta, gamma, p):
    """Closed-form f'(t)."""
    t = np.asarray(t, dtype=float)
    u = -(p - 1.0) / theta * np.log(t)
    pref = (theta / (p - 1.0)) ** (p - 1.0) * t ** (p - 2.0)
    return pref * ((p - 1.0) * (c / u ** gamma - theta)
                   + gamma * c * (p - 1.0) / theta * u ** (-gamma - 1.0))
