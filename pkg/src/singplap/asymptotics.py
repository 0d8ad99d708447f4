"""Boundary-layer diagnostics: rate fits, limits, gradient bounds, shells.

All routines read a field through ``side_arrays``: distance d to one boundary
component, the values u and the inward derivative ∂u/∂ν, ordered by
increasing d.  The two cells nearest the boundary are never used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares

from .barriers import halfspace_profile
from .errors import RegimeError, WindowUnresolved
from .fields import SolutionField
from .mesh import Mesh1D
from .problem import Regime, classify_regime

__all__ = [
    "LayerWindow", "RateFit", "LogFit", "LimitEstimate", "GradientBound",
    "SobolevIndicator", "LinearFit", "fit_boundary_rate", "fit_log_correction",
    "directional_derivative_limit", "richardson_limit", "gradient_bound_check",
    "sobolev_w1p0_indicator", "blowup_rescale", "fit_linear_profile",
    "MIN_POINTS", "EXCLUDED_CELLS",
]

MIN_POINTS = 8
EXCLUDED_CELLS = 2


@dataclass(frozen=True)
class LayerWindow:
    d_min: float
    d_max: float
    side: str = "left"
    n_samples: int = 16

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.n_samples < MIN_POINTS:
            raise ValueError(f"a window needs at least {MIN_POINTS} samples")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def samples(self):
        return np.geomspace(self.d_min, self.d_max, self.n_samples)

    def shifted(self, decades):
        f = 10.0 ** decades
        return LayerWindow(self.d_min * f, self.d_max * f, self.side, self.n_samples)


def _layer(field: SolutionField, window: LayerWindow):
    """(d, u, du) on nodes inside the window, boundary cells excluded."""
    if window.d_max >= field.domain.inradius:
        raise ValueError("window reaches beyond the inradius")
    d, u, g = field.side_arrays(window.side)
    keep = np.zeros(d.size, dtype=bool)
    keep[EXCLUDED_CELLS + 1:] = True
    keep &= (d >= window.d_min * (1 - 1e-12)) & (d <= window.d_max * (1 + 1e-12))
    if keep.sum() < MIN_POINTS:
        raise WindowUnresolved(
            f"only {int(keep.sum())} mesh nodes in [{window.d_min:g}, {window.d_max:g}]")
    return d[keep], u[keep], g[keep]


def _resolved_profile(field, side, d_lo, d_hi):
    """Interpolant of (u, ∂u/∂ν) in log d, guarded by the resolution rules."""
    d, u, g = field.side_arrays(side)
    d_floor = d[EXCLUDED_CELLS]
    if d_lo < d_floor:
        raise WindowUnresolved(f"d={d_lo:g} lies inside the excluded boundary cells")
    if d_hi >= field.domain.inradius:
        raise WindowUnresolved("samples reach beyond the inradius")
    inner = (d > 0) & (d <= field.domain.inradius)
    ld = np.log(d[inner])
    return PchipInterpolator(ld, u[inner]), PchipInterpolator(ld, g[inner])


# ---------------------------------------------------------------------------
# power-law rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    exponent: float
    constant: float
    r2: float
    window: LayerWindow
    n_points: int
    stderr: float
    width: float

    def to_dict(self):
        return {"exponent": self.exponent, "constant": self.constant, "r2": self.r2,
                "window": [self.window.d_min, self.window.d_max], "side": self.window.side,
                "n_points": self.n_points, "stderr": self.stderr, "width": self.width}


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (k, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (k * x + b)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(res ** 2) / ss_tot if ss_tot > 0 else 1.0
    n = x.size
    sxx = np.sum((x - x.mean()) ** 2)
    stderr = np.sqrt(np.sum(res ** 2) / max(n - 2, 1) / sxx) if sxx > 0 else np.inf
    return float(k), float(b), float(min(max(r2, 0.0), 1.0)), float(stderr)


def fit_boundary_rate(field: SolutionField, window: LayerWindow) -> RateFit:
    """Least-squares slope and intercept of ln u against ln d.

    ``width`` is the larger of two standard errors and the spread of the
    local log-log slopes inside the window.
    """
    d, u, _ = _layer(field, window)
    x, y = np.log(d), np.log(u)
    k, b, r2, se = _linfit(x, y)
    local = np.diff(y) / np.diff(x)
    spread = float(local.max() - local.min()) if local.size else 0.0
    return RateFit(k, float(np.exp(b)), r2, window, int(d.size), se, max(2 * se, spread))


# ---------------------------------------------------------------------------
# logarithmic correction (γ = 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogFit:
    """Least-squares regression of u/d on X = (L - ln d)^(1/p) with intercept.

    ``r2`` is the centred coefficient of determination of that regression;
    ``r2_linear`` is the same statistic for the uncorrected model u = a d + b
    written in the same response, u/d = a + b/d, and ``margin`` is their
    difference.  ``r2_origin`` (through-origin fit u/d = c X, uncentered)
    and ``r2_u_space`` (u on d X) are diagnostics only.
    """

    c: float
    intercept: float
    r2: float
    r2_linear: float
    margin: float
    r2_origin: float
    r2_u_space: float
    L: float
    window: LayerWindow
    n_points: int

    def to_dict(self):
        return {"c": self.c, "intercept": self.intercept, "r2": self.r2,
                "r2_linear": self.r2_linear, "margin": self.margin, "r2_origin": self.r2_origin,
                "r2_u_space": self.r2_u_space, "L": self.L,
                "window": [self.window.d_min, self.window.d_max], "n_points": self.n_points}


def _origin_fit(x, y):
    c = float(x @ y / (x @ x))
    res = y - c * x
    return c, float(1.0 - res @ res / (y @ y))


def fit_log_correction(field: SolutionField, window: LayerWindow, p, L=1.0) -> LogFit:
    d, u, _ = _layer(field, window)
    if np.any(L - np.log(d) <= 0):
        raise ValueError("L must exceed ln d on the window")
    X = (L - np.log(d)) ** (1.0 / p)
    y = u / d
    c, b, r2, _ = _linfit(X, y)
    _, _, r2_lin, _ = _linfit(1.0 / d, y)
    _, r2o = _origin_fit(X, y)
    _, r2_u = _origin_fit(d * X, u)
    return LogFit(c, b, r2, r2_lin, r2 - r2_lin, r2o, r2_u, float(L), window, int(d.size))


# ---------------------------------------------------------------------------
# scaled directional derivative and its limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitEstimate:
    distances: np.ndarray
    sequence: np.ndarray
    limit: float
    order: float
    predicted: float
    deviation: float
    beta: float
    method: str = "fitted-order Richardson"

    def to_dict(self):
        return {"distances": self.distances.tolist(), "sequence": self.sequence.tolist(),
                "limit": self.limit, "order": self.order, "predicted": self.predicted,
                "deviation": self.deviation, "beta": self.beta, "method": self.method}


def richardson_limit(d, g):
    """Fit g(d) = L + K d^k over the samples and return (L, k).

    Falls back to k = 1 when the sequence is too flat for the order to be
    identifiable.
    """
    d = np.asarray(d, dtype=float)
    g = np.asarray(g, dtype=float)
    if d.size < 3:
        raise ValueError("extrapolation needs at least three terms")
    scale = max(np.abs(g).max(), 1e-300)
    x = d / d.max()

    def fixed(k):
        A = np.vstack([np.ones_like(x), x ** k]).T
        coef, *_ = np.linalg.lstsq(A, g, rcond=None)
        return coef, g - A @ coef

    coef1, res1 = fixed(1.0)
    if np.max(np.abs(res1)) <= 1e-9 * scale or abs(coef1[1]) <= 1e-9 * scale:
        return float(coef1[0]), 1.0

    def resid(theta):
        L, K, k = theta
        return (L + K * x ** k - g) / scale

    with np.errstate(all="ignore"):
        sol = least_squares(resid, x0=[coef1[0], coef1[1], 1.0],
                            bounds=([-np.inf, -np.inf, 0.25], [np.inf, np.inf, 4.0]))
    L, _, k = sol.x
    return float(L), float(k)


def _scaled_derivative(field, side, p, gamma, beta, distances):
    u_of, g_of = _resolved_profile(field, side, distances.min(), distances.max())
    ld = np.log(distances)
    expo = (gamma - 1.0) / (gamma + p - 1.0)
    # slab embedding: ν = (β, √(1-β²)) against the inward normal (1, 0)
    return distances ** expo * beta * g_of(ld)


def directional_derivative_limit(field: SolutionField, p, gamma, beta=1.0, samples=None,
                                 side="left") -> LimitEstimate:
    """Extrapolate d^((γ-1)/(γ+p-1)) ∂u/∂ν as d → 0 for ⟨ν, η⟩ = β."""
    if classify_regime(gamma) is not Regime.STRONG:
        raise RegimeError("the directional-derivative limit is stated for gamma > 1")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if samples is None:
        samples = LayerWindow(1e-5, 1e-2, side).samples()
    samples = np.sort(np.asarray(samples, dtype=float))[::-1]
    if samples.size < MIN_POINTS:
        raise WindowUnresolved(f"need at least {MIN_POINTS} sample distances")
    seq = _scaled_derivative(field, side, p, gamma, beta, samples)
    L, k = richardson_limit(samples, seq)
    predicted = halfspace_profile(p, gamma).limit_constant(beta)
    return LimitEstimate(samples, seq, L, k, predicted, abs(L - predicted) / predicted, beta)


# ---------------------------------------------------------------------------
# gradient bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientBound:
    regime: Regime
    sup_scaled: float
    scaled: np.ndarray
    distances: np.ndarray
    boundary_derivative: float
    weight: str

    def to_dict(self):
        return {"regime": self.regime.value, "sup_scaled": self.sup_scaled,
                "boundary_derivative": self.boundary_derivative, "weight": self.weight}


def gradient_bound_check(field: SolutionField, p, gamma, regime=None, delta=1e-2, L=1.0,
                         side="left") -> GradientBound:
    """sup over the layer {d < δ} of the regime-scaled |∇u|.

    ``boundary_derivative`` is the one-sided ∂u/∂ν at the first node off
    the excluded boundary cells (the Hopf quantity for γ < 1).
    """
    actual = classify_regime(gamma)
    regime = actual if regime is None else Regime(regime)
    if regime is not actual:
        raise RegimeError(f"gamma={gamma} is in regime {actual.value}, not {regime.value}")
    d, u, g = field.side_arrays(side)
    keep = np.zeros(d.size, dtype=bool)
    keep[EXCLUDED_CELLS:] = True
    keep &= (d > 0) & (d < delta)
    if keep.sum() < MIN_POINTS:
        raise WindowUnresolved("boundary layer is under-resolved")
    dd, gg = d[keep], np.abs(g[keep])
    if regime is Regime.STRONG:
        scaled = gg * dd ** ((gamma - 1.0) / (gamma + p - 1.0))
        weight = "d^((gamma-1)/(gamma+p-1))"
    elif regime is Regime.CRITICAL:
        scaled = gg * (L - np.log(dd)) ** (-1.0 / p)
        weight = "(L-ln d)^(-1/p)"
    else:
        scaled = gg
        weight = "1"
    return GradientBound(regime, float(scaled.max()), scaled, dd, float(g[EXCLUDED_CELLS]), weight)


# ---------------------------------------------------------------------------
# Sobolev membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SobolevIndicator:
    """Shell integrals I_k = ∫_{δ_{k+1} < d < δ_k} |∇u|^p over geometric shells.

    I_k ∝ δ_k^e with e the *shell exponent*; the *density exponent* of
    |∇u|^p ∝ d^s is s = e - 1.  The energy near ∂Ω is finite iff e > 0,
    equivalently s > -1.  On an interval each shell is the union of the two
    mirrored sub-intervals; radial shells carry the weight r^(N-1).
    """

    shell_exponent: float
    density_exponent: float
    r2: float
    integrable: bool
    deltas: np.ndarray
    integrals: np.ndarray
    convention: str = "shell exponent e of I_k ~ delta_k^e; integrable iff e > 0 (density exponent > -1)"

    def to_dict(self):
        return {"shell_exponent": self.shell_exponent, "density_exponent": self.density_exponent,
                "r2": self.r2, "integrable": self.integrable, "deltas": self.deltas.tolist(),
                "integrals": self.integrals.tolist(), "convention": self.convention}


def _shell_integral(field, p, lo, hi, sides):
    total = 0.0
    N = getattr(field.domain, "N", 1)
    for side in sides:
        d, _, g = field.side_arrays(side)
        x = field.x if side == "left" else field.x[::-1]
        inner = d > 0
        ld = np.log(d[inner])
        dens = np.abs(g[inner]) ** p * (np.abs(x[inner]) ** (N - 1) if N > 1 else 1.0)
        f = PchipInterpolator(ld, np.log(np.maximum(dens, 1e-300)))
        # ∫ dens dd = ∫ dens·d dln d, 16-point Gauss in ln d
        gx, gw = np.polynomial.legendre.leggauss(16)
        a, b = np.log(lo), np.log(hi)
        t = 0.5 * (b - a) * gx + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(gw * np.exp(f(t) + t))
    return total


def sobolev_w1p0_indicator(field: SolutionField, p, shells=None) -> SobolevIndicator:
    if shells is None:
        shells = np.geomspace(1e-2, 1e-6, 9)
    deltas = np.sort(np.asarray(shells, dtype=float))[::-1]
    if deltas.size < 3:
        raise ValueError("need at least three shell radii")
    d_left = field.side_arrays("left")[0]
    if deltas[-1] < d_left[EXCLUDED_CELLS] or deltas[0] >= field.domain.inradius:
        raise WindowUnresolved("shells leave the resolved region")
    from .problem import Interval, Annulus
    sides = ("left", "right") if isinstance(field.domain, (Interval, Annulus)) else ("right",)
    ints = np.array([_shell_integral(field, p, deltas[k + 1], deltas[k], sides)
                     for k in range(deltas.size - 1)])
    e, _, r2, _ = _linfit(np.log(deltas[:-1]), np.log(ints))
    return SobolevIndicator(e, e - 1.0, r2, bool(e > 0), deltas, ints)


# ---------------------------------------------------------------------------
# blow-up rescaling
# ---------------------------------------------------------------------------

def blowup_rescale(field: SolutionField, delta, p, gamma, regime=None, L=1.0,
                   y_mesh: Mesh1D | None = None, side="left") -> SolutionField:
    """w(y) = δ^(-m) u(δy) (γ > 1) or δ^(-1)(L - ln δ)^(-1/p) u(δy) (γ = 1),
    resampled on ``y_mesh`` (default: 64 uniform cells on [0.5, 2])."""
    actual = classify_regime(gamma)
    regime = actual if regime is None else Regime(regime)
    if regime is not actual:
        raise RegimeError(f"gamma={gamma} is in regime {actual.value}")
    if y_mesh is None:
        y_mesh = Mesh1D.uniform(0.5, 2.0, 64)
    y = y_mesh.nodes
    if y[0] <= 0:
        raise ValueError("y mesh must stay off the boundary")
    d_needed = delta * y
    d, _, _ = field.side_arrays(side)
    inside = (d >= d_needed[0]) & (d <= d_needed[-1])
    if inside.sum() < MIN_POINTS:
        raise WindowUnresolved("fewer than 8 mesh nodes under the rescaled window")
    u_of, g_of = _resolved_profile(field, side, d_needed[0], d_needed[-1])
    if regime is Regime.STRONG:
        scale = delta ** (-p / (gamma + p - 1.0))
    elif regime is Regime.CRITICAL:
        scale = 1.0 / (delta * (L - np.log(delta)) ** (1.0 / p))
    else:
        scale = 1.0 / delta
    ld = np.log(d_needed)
    w = scale * u_of(ld)
    dw = scale * delta * g_of(ld)
    return SolutionField(y_mesh, w, dw, None, {"delta": delta, "scale": scale,
                                               "regime": regime.value, "side": side})


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    r2_origin: float


def fit_linear_profile(w: SolutionField) -> LinearFit:
    """Straight-line fit of a rescaled field: centred r² with intercept, and
    the uncentered r² of the through-origin model a·y."""
    y, v = w.x, w.values
    k, b, r2, _ = _linfit(y, v)
    _, r2o = _origin_fit(y, v)
    return LinearFit(k, b, r2, r2o)
