"""Problem data, the domain catalogue and distance geometry.

The equation handled throughout the package is

    -Δ_p u + θ |∇u|^q = u^(-γ) + f(u)   in Ω,   u = 0 on ∂Ω,

with Ω drawn from a small catalogue of domains on which the distance to the
boundary and the nearest boundary point are available in closed form.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigError, InvalidDomain, InvalidExponent, OutsideDomain

__all__ = [
    "Regime", "ReactionSpec", "Interval", "Annulus", "Ball", "Rectangle",
    "Disk", "DomainSpec", "ProblemSpec", "ValidatedProblem", "Proximity",
    "validate_problem", "problem_violations", "classify_regime",
    "distance_and_inward", "problem_from_mapping", "load_problem",
    "domain_from_mapping", "reaction_from_mapping",
]


class Regime(str, enum.Enum):
    STRONG = "gamma>1"
    CRITICAL = "gamma==1"
    WEAK = "gamma<1"


def classify_regime(gamma: float) -> Regime:
    if math.isclose(gamma, 1.0, rel_tol=0.0, abs_tol=1e-12):
        return Regime.CRITICAL
    return Regime.STRONG if gamma > 1.0 else Regime.WEAK


# ---------------------------------------------------------------------------
# reaction term f
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReactionSpec:
    """Polynomial reaction f(u) = sum_k coeffs[k] u^k.

    ``variant`` only records how the user spelled it; evaluation always goes
    through the coefficient tuple, so every variant is locally Lipschitz.
    """

    variant: str = "zero"
    coeffs: tuple = ()

    @classmethod
    def zero(cls):
        return cls("zero", ())

    @classmethod
    def constant(cls, c0):
        return cls("constant", (float(c0),))

    @classmethod
    def affine(cls, c0, c1):
        return cls("affine", (float(c0), float(c1)))

    @classmethod
    def polynomial(cls, coeffs):
        return cls("polynomial", tuple(float(c) for c in coeffs))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for c in reversed(self.coeffs):
            out = out * u + c
        return out

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for k in range(len(self.coeffs) - 1, 0, -1):
            out = out * u + k * self.coeffs[k]
        return out

    def is_positive_on_positive_axis(self) -> bool:
        """Sufficient check for f(s) > 0 for s > 0 (all coefficients >= 0, one > 0)."""
        return bool(self.coeffs) and all(c >= 0 for c in self.coeffs) and any(
            c > 0 for c in self.coeffs)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

class Proximity(NamedTuple):
    distance: float
    inward: np.ndarray
    tie: bool


@dataclass(frozen=True)
class Interval:
    """The interval (0, R)."""

    R: float = 1.0
    kind = "interval"
    dim = 1

    @property
    def inradius(self):
        return 0.5 * self.R

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x, self.R - x)


@dataclass(frozen=True)
class Annulus:
    """{r1 < |x| < r2} in R^N."""

    r1: float
    r2: float
    N: int = 2
    kind = "annulus"

    @property
    def dim(self):
        return self.N

    @property
    def inradius(self):
        return 0.5 * (self.r2 - self.r1)

    def distance_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.minimum(r - self.r1, self.r2 - r)


@dataclass(frozen=True)
class Ball:
    """{|x| < R} in R^N, treated radially."""

    R: float = 1.0
    N: int = 2
    kind = "ball"

    @property
    def dim(self):
        return self.N

    @property
    def inradius(self):
        return self.R

    def distance_radial(self, r):
        return self.R - np.asarray(r, dtype=float)


@dataclass(frozen=True)
class Rectangle:
    """The box [-a/2, a/2] x [-b/2, b/2], centred so it is symmetric in x1."""

    a: float = 1.0
    b: float = 1.0
    kind = "rectangle"
    dim = 2

    @property
    def inradius(self):
        return 0.5 * min(self.a, self.b)

    @property
    def x1_min(self):
        return -0.5 * self.a

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.minimum(0.5 * self.a - np.abs(x), 0.5 * self.b - np.abs(y))


@dataclass(frozen=True)
class Disk:
    """The disk {|x| < R} centred at the origin."""

    R: float = 1.0
    kind = "disk"
    dim = 2

    @property
    def inradius(self):
        return self.R

    @property
    def x1_min(self):
        return -self.R

    def distance(self, x, y):
        return self.R - np.hypot(x, y)


DomainSpec = Union[Interval, Annulus, Ball, Rectangle, Disk]


def _domain_violations(domain) -> list:
    bad = []
    if isinstance(domain, Interval):
        if not domain.R > 0:
            bad.append("Interval: R must be positive")
    elif isinstance(domain, Annulus):
        if not domain.r1 > 0:
            bad.append("Annulus: r1 must be positive")
        if not domain.r2 > domain.r1:
            bad.append("Annulus: r2 must exceed r1")
        if int(domain.N) != domain.N or domain.N < 1:
            bad.append("Annulus: N must be an integer >= 1")
    elif isinstance(domain, Ball):
        if not domain.R > 0:
            bad.append("Ball: R must be positive")
        if int(domain.N) != domain.N or domain.N < 1:
            bad.append("Ball: N must be an integer >= 1")
    elif isinstance(domain, Rectangle):
        if not (domain.a > 0 and domain.b > 0):
            bad.append("Rectangle: side lengths must be positive")
    elif isinstance(domain, Disk):
        if not domain.R > 0:
            bad.append("Disk: R must be positive")
    else:
        bad.append(f"unknown domain type {type(domain).__name__}")
    return bad


def distance_and_inward(domain, x) -> Proximity:
    """Distance to the boundary and the inward unit normal at the nearest point.

    On the medial axis the nearest point is not unique; the component with the
    smaller coordinate (or radius) is chosen and ``tie`` is set.
    """
    if isinstance(domain, Interval):
        x = float(np.asarray(x).reshape(-1)[0])
        if not 0.0 < x < domain.R:
            raise OutsideDomain(f"x={x} not inside (0, {domain.R})")
        dl, dr = x, domain.R - x
        tie = math.isclose(dl, dr, rel_tol=0.0, abs_tol=1e-14 * domain.R)
        if dl <= dr or tie:
            return Proximity(dl, np.array([1.0]), tie)
        return Proximity(dr, np.array([-1.0]), tie)

    if isinstance(domain, (Annulus, Ball, Disk)):
        N = 2 if isinstance(domain, Disk) else domain.N
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != N:
            raise OutsideDomain(f"point has dimension {x.size}, domain has {N}")
        r = float(np.linalg.norm(x))
        if isinstance(domain, Annulus):
            if not domain.r1 < r < domain.r2:
                raise OutsideDomain(f"|x|={r} not in ({domain.r1}, {domain.r2})")
            di, do = r - domain.r1, domain.r2 - r
            tie = math.isclose(di, do, rel_tol=0.0, abs_tol=1e-14 * domain.r2)
            if di <= do or tie:
                return Proximity(di, x / r, tie)
            return Proximity(do, -x / r, tie)
        R = domain.R
        if not r < R:
            raise OutsideDomain(f"|x|={r} not below R={R}")
        if r == 0.0:
            e = np.zeros(N)
            e[0] = 1.0
            return Proximity(R, e, True)
        return Proximity(R - r, -x / r, False)

    if isinstance(domain, Rectangle):
        x = np.asarray(x, dtype=float).reshape(-1)
        ha, hb = 0.5 * domain.a, 0.5 * domain.b
        if not (abs(x[0]) < ha and abs(x[1]) < hb):
            raise OutsideDomain(f"{x} not inside the rectangle")
        # order: left, bottom, right, top (smaller coordinate first)
        dists = np.array([x[0] + ha, x[1] + hb, ha - x[0], hb - x[1]])
        normals = [np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                   np.array([-1.0, 0.0]), np.array([0.0, -1.0])]
        d = dists.min()
        hits = np.flatnonzero(np.abs(dists - d) <= 1e-14 * max(ha, hb))
        return Proximity(float(d), normals[hits[0]], hits.size > 1)

    raise InvalidDomain(f"unknown domain type {type(domain).__name__}")


# ---------------------------------------------------------------------------
# problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    p: float
    gamma: float
    q: float = 1.0
    theta: float = 0.0
    reaction: ReactionSpec = field(default_factory=ReactionSpec.zero)
    domain: DomainSpec = field(default_factory=Interval)

    def to_dict(self):
        return {
            "p": self.p, "gamma": self.gamma, "q": self.q, "theta": self.theta,
            "reaction": {"variant": self.reaction.variant,
                         "coeffs": list(self.reaction.coeffs)},
            "domain": {"variant": self.domain.kind, **asdict(self.domain)},
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ValidatedProblem:
    spec: ProblemSpec
    regime: Regime

    # convenience pass-throughs
    @property
    def p(self):
        return self.spec.p

    @property
    def gamma(self):
        return self.spec.gamma

    @property
    def q(self):
        return self.spec.q

    @property
    def theta(self):
        return self.spec.theta

    @property
    def reaction(self):
        return self.spec.reaction

    @property
    def domain(self):
        return self.spec.domain

    @property
    def boundary_exponent(self):
        """p/(γ+p-1), the boundary rate for γ>1 (used for the regularized trace)."""
        return self.p / (self.gamma + self.p - 1.0)


def problem_violations(spec: ProblemSpec) -> tuple[list, list]:
    """Return (exponent violations, domain violations)."""
    bad_exp = []
    if not spec.p > 1:
        bad_exp.append(f"p must exceed 1 (got {spec.p})")
    if not spec.gamma > 0:
        bad_exp.append(f"gamma must be positive (got {spec.gamma})")
    if not 0 < spec.q <= spec.p:
        bad_exp.append(f"q must lie in (0, p] (got {spec.q})")
    if not spec.theta >= 0:
        bad_exp.append(f"theta must be nonnegative (got {spec.theta})")
    if not all(math.isfinite(c) for c in spec.reaction.coeffs):
        bad_exp.append("reaction coefficients must be finite")
    return bad_exp, _domain_violations(spec.domain)


def validate_problem(spec: ProblemSpec) -> ValidatedProblem:
    bad_exp, bad_dom = problem_violations(spec)
    if bad_exp:
        err = InvalidExponent("; ".join(bad_exp + bad_dom))
        err.violations = bad_exp + bad_dom
        raise err
    if bad_dom:
        err = InvalidDomain("; ".join(bad_dom))
        err.violations = bad_dom
        raise err
    return ValidatedProblem(spec, classify_regime(spec.gamma))


# ---------------------------------------------------------------------------
# declarative config
# ---------------------------------------------------------------------------

_DOMAIN_KEYS = {
    "interval": (Interval, ("R",)),
    "annulus": (Annulus, ("r1", "r2", "N")),
    "ball": (Ball, ("R", "N")),
    "rectangle": (Rectangle, ("a", "b")),
    "disk": (Disk, ("R",)),
}


def _reject_unknown(section, allowed, prefix):
    for key in section:
        if key not in allowed:
            raise ConfigError("unknown key", f"{prefix}.{key}")


def domain_from_mapping(sec: dict) -> DomainSpec:
    sec = dict(sec)
    variant = str(sec.pop("variant", "interval")).lower()
    if variant not in _DOMAIN_KEYS:
        raise ConfigError(f"unknown domain variant {variant!r}", "domain.variant")
    cls, keys = _DOMAIN_KEYS[variant]
    _reject_unknown(sec, keys, "domain")
    kwargs = {k: (int(v) if k == "N" else float(v)) for k, v in sec.items()}
    return cls(**kwargs)


def reaction_from_mapping(sec: dict) -> ReactionSpec:
    sec = dict(sec)
    _reject_unknown(sec, ("variant", "coefficients"), "reaction")
    variant = str(sec.get("variant", "zero")).lower()
    coeffs = [float(c) for c in sec.get("coefficients", [])]
    expected = {"zero": 0, "constant": 1, "affine": 2}
    if variant not in (*expected, "polynomial"):
        raise ConfigError(f"unknown reaction variant {variant!r}", "reaction.variant")
    if variant in expected and len(coeffs) != expected[variant]:
        raise ConfigError(f"{variant} needs {expected[variant]} coefficients",
                          "reaction.coefficients")
    return ReactionSpec(variant, tuple(coeffs))


def problem_from_mapping(cfg: dict) -> ValidatedProblem:
    """Build a validated problem from the [problem]/[reaction]/[domain] tables."""
    prob = dict(cfg.get("problem", {}))
    _reject_unknown(prob, ("p", "gamma", "q", "theta"), "problem")
    for key in ("p", "gamma"):
        if key not in prob:
            raise ConfigError("missing required key", f"problem.{key}")
    spec = ProblemSpec(
        p=float(prob["p"]), gamma=float(prob["gamma"]),
        q=float(prob.get("q", 1.0)), theta=float(prob.get("theta", 0.0)),
        reaction=reaction_from_mapping(cfg.get("reaction", {})),
        domain=domain_from_mapping(cfg.get("domain", {})),
    )
    bad_exp, bad_dom = problem_violations(spec)
    if bad_exp:
        key = next(k for k in ("p", "gamma", "q", "theta", "reaction")
                   if any(m.startswith(k) for m in bad_exp)) if bad_exp else None
        raise ConfigError("; ".join(bad_exp), f"problem.{key}")
    if bad_dom:
        raise ConfigError("; ".join(bad_dom), "domain")
    return ValidatedProblem(spec, classify_regime(spec.gamma))


def load_problem(path) -> ValidatedProblem:
    from .config import read_toml
    return problem_from_mapping(read_toml(path))
