import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singplap.barriers import (annulus_profile, barrier_linear_eig, barrier_log_eig,
                               barrier_power_eig, chain_rule_coefficient, divergence_coefficient,
                               exp_transform, halfspace_profile, inverse_exp_transform,
                               wcp_derivative, wcp_nonlinearity, wcp_threshold)
from singplap.comparison import verify_sub_super
from singplap.eigen import Eigenpair, first_eigenpair
from singplap.errors import DomainError, NormalizationError, RegimeError
from singplap.fields import SolutionField
from singplap.mesh import Mesh1D, default_mesh
from singplap.problem import Annulus, Interval


@pytest.fixture(scope="module")
def eig2():
    return first_eigenpair(2.0, Interval(1.0), default_mesh(Interval(1.0), 1024))


@pytest.fixture(scope="module")
def eig3():
    return first_eigenpair(3.0, Interval(1.0), default_mesh(Interval(1.0), 1024))


def interior(eig, margin=0.01):
    x = eig.mesh.nodes
    return (x > margin) & (x < 1 - margin) & (np.abs(x - 0.5) > 0.05)


# ---------------------------------------------------------------------------
# half-space profile
# ---------------------------------------------------------------------------

def test_halfspace_constants_p2_gamma3():
    prof = halfspace_profile(2.0, 3.0)
    assert prof.A == pytest.approx(np.sqrt(2.0))
    assert prof.m == pytest.approx(0.5)
    assert prof.limit_constant(1.0) == pytest.approx(np.sqrt(2.0) / 2)
    assert prof.limit_constant(0.5) == pytest.approx(np.sqrt(2.0) / 4)


@given(st.floats(1.1, 6.0), st.floats(1.01, 10.0))
@settings(max_examples=100, deadline=None)
def test_halfspace_profile_solves_the_ode(p, gamma):
    prof = halfspace_profile(p, gamma)
    t = np.geomspace(1e-6, 1e2, 50)
    assert prof.ode_residual(t).max() <= 1e-10


def test_halfspace_profile_rejects_other_regimes():
    with pytest.raises(RegimeError):
        halfspace_profile(2.0, 1.0)
    with pytest.raises(RegimeError):
        halfspace_profile(2.0, 0.5)
    with pytest.raises(DomainError):
        halfspace_profile(1.0, 3.0)


def test_halfspace_profile_is_an_exact_weak_solution():
    # a left-graded mesh keeps tiny cells away from the truncation end
    m = Mesh1D.geometric(0.0, 1.0, 400, 1.15, 1e-8, sides=("left",))
    prof = halfspace_profile(2.0, 3.0)
    for kind in ("sub", "super"):
        rep = verify_sub_super(1.0, 3.0, 2.0, 0.0, prof, kind, mesh=m)
        assert rep.ok, rep


# ---------------------------------------------------------------------------
# eigenfunction barriers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("s, gamma", [(1.0, 3.0), (0.4, 2.0), (2.5, 5.0)])
def test_power_coefficient_matches_chain_rule(eig2, s, gamma):
    b = barrier_power_eig(s, 2.0, gamma, eig2)
    ch = chain_rule_coefficient("power", s, 2.0, gamma, eig2)
    mask = eig2.values > 0
    assert np.max(np.abs(ch - b.coeff_a)[mask] / np.abs(b.coeff_a[mask])) < 1e-12


def test_power_coefficient_divergence_route_is_second_order():
    errs = []
    for n in (256, 512, 1024):
        eig = first_eigenpair(3.0, Interval(1.0), Mesh1D.uniform(0.0, 1.0, n))
        b = barrier_power_eig(1.0, 3.0, 2.5, eig)
        dv = divergence_coefficient(b, 3.0)
        mask = interior(eig, 0.1)
        errs.append(np.max(np.abs(dv - b.coeff_a)[mask] / b.coeff_a[mask]))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.7)
    assert errs[-1] < 1e-4


def test_power_upper_coefficient_from_first_principles(eig2):
    # b = a + θ(|∇w|^p + 1) w^γ, evaluated directly from w and its gradient
    s, gamma, theta, p = 0.8, 3.0, 1.5, 2.0
    b = barrier_power_eig(s, p, gamma, eig2, theta)
    m = p / (gamma + p - 1)
    phi = eig2.values
    mask = phi > 0
    w = s * phi[mask] ** m
    dw = s * m * phi[mask] ** (m - 1) * np.abs(eig2.grad_phi1[mask])
    ref = b.coeff_a[mask] + theta * (dw**p + 1) * w**gamma
    assert np.allclose(b.coeff_b[mask], ref, rtol=1e-12)
    assert np.all(b.coeff_b >= b.coeff_a)


def test_power_barrier_is_positive_and_scales(eig2):
    b1 = barrier_power_eig(1.0, 2.0, 3.0, eig2)
    b2 = barrier_power_eig(2.0, 2.0, 3.0, eig2)
    assert np.allclose(b2.values, 2 * b1.values)
    # a_s is homogeneous of degree γ + p - 1 in s
    assert np.allclose(b2.coeff_a, 2**4 * b1.coeff_a)
    assert np.all(b1.coeff_a > 0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_log_coefficient_display_agrees_with_chain_rule(p):
    eig = first_eigenpair(p, Interval(1.0), default_mesh(Interval(1.0), 1024))
    b = barrier_log_eig(1.0, p, 1.0, 1.0, eig)
    assert b.extra["coeff_a_agrees"]
    assert b.extra["coeff_a_mismatch"] < 1e-8


def test_log_barrier_needs_sup_normalization(eig2):
    scaled = Eigenpair(eig2.lambda1, eig2.phi1.with_values(2 * eig2.values), 2.0)
    with pytest.raises(NormalizationError):
        barrier_log_eig(1.0, 2.0, 1.0, 1.0, scaled)


def test_log_barrier_shape(eig2):
    b = barrier_log_eig(1.0, 2.0, 0.0, 1.0, eig2)
    phi = eig2.values
    mask = phi > 0
    assert np.allclose(b.values[mask], phi[mask] * np.sqrt(1 - np.log(phi[mask])))
    assert b.values[0] == 0.0 and b.values[-1] == 0.0


def test_linear_barrier_coefficients(eig2):
    s, gamma, theta = 0.7, 0.5, 2.0
    b = barrier_linear_eig(s, 2.0, gamma, theta, eig2)
    ch = chain_rule_coefficient("linear", s, 2.0, gamma, eig2)
    mask = interior(eig2)
    assert np.allclose(b.coeff_a[mask], ch[mask], rtol=1e-10)
    assert np.all(b.coeff_b >= b.coeff_a)


@pytest.mark.parametrize("fn, args", [
    (barrier_power_eig, (1.0, 2.0, 0.5)),
    (barrier_linear_eig, (1.0, 2.0, 2.0, 0.0)),
])
def test_barriers_reject_wrong_regime(eig2, fn, args):
    with pytest.raises(RegimeError):
        fn(*args, eig2)


def test_barriers_reject_nonpositive_scale(eig2):
    with pytest.raises(DomainError):
        barrier_power_eig(0.0, 2.0, 3.0, eig2)
    with pytest.raises(DomainError):
        barrier_log_eig(-1.0, 2.0, 0.0, 1.0, eig2)


# ---------------------------------------------------------------------------
# annulus profile
# ---------------------------------------------------------------------------

def test_annulus_profile_is_comparable_to_distance():
    dom = Annulus(1.0, 2.0, 2)
    U = annulus_profile(1.0, 0.5, 2.0, 1.0, 2.0, 2, default_mesh(dom, 1024))
    assert 0 < U.meta["c"] <= U.meta["C"] < np.inf
    d = dom.distance_radial(U.x)
    inner = d > 0
    ratio = U.values[inner] / d[inner]
    assert ratio.min() >= U.meta["c"] and ratio.max() <= U.meta["C"]


def test_annulus_profile_grows_with_M():
    dom = Annulus(1.0, 2.0, 2)
    m = default_mesh(dom, 512)
    lo = annulus_profile(1.0, 0.5, 2.0, 1.0, 2.0, 2, m)
    hi = annulus_profile(3.0, 0.5, 2.0, 1.0, 2.0, 2, m)
    assert np.all(hi.values[1:-1] > lo.values[1:-1])
    with pytest.raises(RegimeError):
        annulus_profile(1.0, 2.0, 2.0, 1.0, 2.0, 2, m)


# ---------------------------------------------------------------------------
# exponential transform and the auxiliary nonlinearity
# ---------------------------------------------------------------------------

@given(st.floats(0.1, 5.0), st.floats(1.2, 4.0))
@settings(max_examples=40, deadline=None)
def test_exp_transform_round_trip(theta, p):
    m = Mesh1D.uniform(0.0, 1.0, 32)
    f = SolutionField.from_function(m, lambda x: 3 * x * (1 - x), Interval(1.0))
    v = exp_transform(f, theta, p)
    assert np.all((v.values > 0) & (v.values <= 1))
    back = inverse_exp_transform(v, theta, p)
    assert np.allclose(back.values, f.values, atol=1e-12)


def test_exp_transform_errors():
    m = Mesh1D.uniform(0.0, 1.0, 8)
    f = SolutionField.from_function(m, lambda x: x, Interval(1.0))
    with pytest.raises(RegimeError):
        exp_transform(f, 0.0, 2.0)
    with pytest.raises(DomainError):
        exp_transform(f.with_values(-f.values), 1.0, 2.0)


def test_wcp_reference_values():
    val, ts = wcp_nonlinearity(0.9, 1.0, 1.0, 1.0, 2.0)
    assert val == pytest.approx(7.6421, abs=1e-4)
    assert wcp_nonlinearity(0.2, 1.0, 1.0, 1.0, 2.0)[0] == pytest.approx(-0.07573, abs=1e-5)
    assert ts == pytest.approx(np.exp(-1.0))


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(1.2, 4.0))
@settings(max_examples=100, deadline=None)
def test_wcp_zero_and_sign_change(c, theta, gamma, p):
    ts = wcp_threshold(c, theta, gamma, p)
    if not 1e-8 < ts < 1 - 1e-6:
        return
    assert abs(wcp_nonlinearity(ts, c, theta, gamma, p)[0]) <= 1e-12
    above = np.linspace(ts, 1, 52)[1:-1]
    assert np.all(wcp_nonlinearity(above, c, theta, gamma, p)[0] > 0)
    below = np.linspace(0, ts, 52)[1:-1]
    assert np.all(wcp_nonlinearity(below, c, theta, gamma, p)[0] < 0)


@given(st.floats(0.05, 0.95), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0),
       st.floats(1.2, 4.0))
@settings(max_examples=100, deadline=None)
def test_wcp_derivative_matches_finite_differences(t, c, theta, gamma, p):
    h = 1e-6 * min(t, 1 - t)
    fd = (wcp_nonlinearity(t + h, c, theta, gamma, p)[0]
          - wcp_nonlinearity(t - h, c, theta, gamma, p)[0]) / (2 * h)
    exact = float(wcp_derivative(t, c, theta, gamma, p))
    scale = max(abs(exact), abs(wcp_nonlinearity(t, c, theta, gamma, p)[0]) / t, 1e-8)
    assert abs(fd - exact) <= 1e-5 * scale


def test_wcp_rejects_bad_arguments():
    with pytest.raises(DomainError):
        wcp_nonlinearity(1.0, 1.0, 1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        wcp_nonlinearity(0.5, -1.0, 1.0, 1.0, 2.0)
