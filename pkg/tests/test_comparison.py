import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from singplap.barriers import PowerProfile, barrier_power_eig, halfspace_profile
from singplap.comparison import (check_ordering, empirical_lambda, find_barrier_sandwich,
                                 p_monotonicity_gap, verify_sub_super)
from singplap.eigen import first_eigenpair
from singplap.errors import DomainError, MeshMismatch
from singplap.fields import SolutionField
from singplap.mesh import Mesh1D, default_mesh
from singplap.problem import Interval
from singplap.solver1d import solve_radial

from conftest import make_problem

HALF_MESH = Mesh1D.geometric(0.0, 1.0, 400, 1.15, 1e-8, sides=("left",))


def scaled_profile(s, p=2.0, gamma=3.0):
    prof = halfspace_profile(p, gamma)
    return PowerProfile(s * prof.A, prof.m, p, gamma)


# ---------------------------------------------------------------------------
# ordering
# ---------------------------------------------------------------------------

def test_ordering_of_identical_fields():
    m = Mesh1D.uniform(0.0, 1.0, 32)
    f = SolutionField.from_function(m, lambda x: x * (1 - x), Interval(1.0))
    rep = check_ordering(f, f)
    assert rep.ok and rep.max_violation == 0.0


def test_ordering_violation_is_located():
    m = Mesh1D.uniform(0.0, 1.0, 32)
    f = SolutionField.from_function(m, lambda x: x * (1 - x), Interval(1.0))
    bump = f.values.copy()
    bump[7] += 1e-6
    rep = check_ordering(f.with_values(bump), f)
    assert not rep.ok
    assert rep.violation_locus == 7
    assert rep.max_violation == pytest.approx(1e-6)
    assert check_ordering(f.with_values(bump), f, tol=2e-6).ok


def test_ordering_excludes_boundary_cells():
    m = Mesh1D.uniform(0.0, 1.0, 32)
    f = SolutionField.from_function(m, lambda x: x * (1 - x), Interval(1.0))
    bump = f.values.copy()
    bump[1] += 1.0
    assert not check_ordering(f.with_values(bump), f).ok
    assert check_ordering(f.with_values(bump), f, exclude_cells=1).ok


def test_ordering_resamples_or_rejects_meshes():
    a = SolutionField.from_function(Mesh1D.uniform(0.0, 1.0, 32), lambda x: x, Interval(1.0))
    b = SolutionField.from_function(Mesh1D.uniform(0.0, 1.0, 48), lambda x: x + 1e-3, Interval(1.0))
    rep = check_ordering(a, b)
    assert rep.ok and "resampled" in rep.notice
    c = SolutionField.from_function(Mesh1D.uniform(0.0, 2.0, 32), lambda x: x, Interval(2.0))
    with pytest.raises(MeshMismatch):
        check_ordering(a, c)


# ---------------------------------------------------------------------------
# sub / super verification
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p, gamma", [(2.0, 3.0), (3.0, 2.0), (1.5, 4.0)])
def test_halfspace_profile_is_both_sub_and_super(p, gamma):
    prof = halfspace_profile(p, gamma)
    for kind in ("sub", "super"):
        assert verify_sub_super(1.0, gamma, p, 0.0, prof, kind, mesh=HALF_MESH).ok


@given(st.floats(1.02, 3.0))
@settings(max_examples=15, deadline=None)
def test_scaled_profile_sides(s):
    # -Δ_p (sU) = s^(p-1+γ) (sU)^(-γ): super for s > 1, sub for s < 1
    up = scaled_profile(s)
    down = scaled_profile(1.0 / s)
    assert verify_sub_super(1.0, 3.0, 2.0, 0.0, up, "super", mesh=HALF_MESH).ok
    assert not verify_sub_super(1.0, 3.0, 2.0, 0.0, up, "sub", mesh=HALF_MESH).ok
    assert verify_sub_super(1.0, 3.0, 2.0, 0.0, down, "sub", mesh=HALF_MESH).ok
    assert not verify_sub_super(1.0, 3.0, 2.0, 0.0, down, "super", mesh=HALF_MESH).ok


def test_discrete_solution_satisfies_its_own_equation(strong_solution):
    # the last continuation level still carries a boundary trace of 1e-5,
    # which leaves a relative defect near 1e-6 in the first few cells
    _, u = strong_solution
    away = u.distance > 1e-3
    for kind in ("sub", "super"):
        assert verify_sub_super(1.0, 3.0, 2.0, 0.0, u, kind, tol=1e-8, mask=away).ok
        assert verify_sub_super(1.0, 3.0, 2.0, 0.0, u, kind, tol=1e-5).ok


def test_gradient_mode_with_zero_theta_warns():
    with pytest.warns(UserWarning):
        rep = verify_sub_super(1.0, 3.0, 2.0, 0.0, halfspace_profile(2.0, 3.0), "super",
                               mode="gradient", mesh=HALF_MESH)
    assert rep.extra["mode"] == "plain" and rep.notice


def test_gradient_mode_sub_enforces_ceiling():
    # a subsolution above (c/θ)^(1/γ) is rejected even if the PDE inequality holds
    prof = scaled_profile(0.5)
    rep = verify_sub_super(1.0, 3.0, 2.0, 10.0, prof, "sub", mode="gradient", mesh=HALF_MESH)
    assert rep.extra["ceiling"] == pytest.approx(0.1 ** (1 / 3))
    assert rep.extra["ceiling_violation"] > 0
    assert not rep.ok


def test_verify_input_checks():
    prof = halfspace_profile(2.0, 3.0)
    with pytest.raises(ValueError):
        verify_sub_super(1.0, 3.0, 2.0, 0.0, prof, "both", mesh=HALF_MESH)
    with pytest.raises(ValueError):
        verify_sub_super(1.0, 3.0, 2.0, 0.0, prof, "sub")
    m = Mesh1D.uniform(0.0, 1.0, 16)
    neg = SolutionField.from_function(m, lambda x: x - 0.5, Interval(1.0))
    with pytest.raises(DomainError):
        verify_sub_super(1.0, 3.0, 2.0, 0.0, neg, "sub", exclude_cells=0)


def test_sandwich_on_a_coarser_solve():
    pr = make_problem(2.0, 3.0)
    m = default_mesh(pr.domain, 1024)
    u = solve_radial(pr, m)
    eig = first_eigenpair(2.0, pr.domain, m)
    res = find_barrier_sandwich(u, lambda s: barrier_power_eig(s, 2.0, 3.0, eig))
    assert res.ok
    assert 0 < res.s_lower < res.s_upper


# ---------------------------------------------------------------------------
# monotonicity inequality
# ---------------------------------------------------------------------------

vec2 = arrays(np.float64, 2, elements=st.floats(-10, 10))


@given(vec2, vec2, st.floats(1.1, 5.0))
@settings(max_examples=200, deadline=None)
def test_flux_map_is_monotone(a, b, p):
    if np.linalg.norm(a) + np.linalg.norm(b) < 1e-6:
        return
    lhs, rhs, ratio = p_monotonicity_gap(a, b, p)
    assert lhs >= -1e-9 * max(1.0, rhs)
    if np.linalg.norm(a - b) > 1e-6 * (np.linalg.norm(a) + np.linalg.norm(b)):
        assert ratio > 0


@given(vec2, vec2, st.floats(1.1, 5.0), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_gap_ratio_is_scale_invariant(a, b, p, t):
    if np.linalg.norm(a - b) < 1e-3:
        return
    r1 = p_monotonicity_gap(a, b, p)[2]
    r2 = p_monotonicity_gap(t * a, t * b, p)[2]
    assert r2 == pytest.approx(r1, rel=1e-8)


def test_gap_reference_values():
    assert p_monotonicity_gap([1.0, 2.0], [0.0, 1.0], 2.0)[2] == pytest.approx(1.0)
    # antipodal pair: ratio 2^(2-p)
    for p in (1.5, 3.0, 4.0):
        assert p_monotonicity_gap([1.0, 0.0], [-1.0, 0.0], p)[2] == pytest.approx(2 ** (2 - p))
    with pytest.raises(DomainError):
        p_monotonicity_gap([0.0, 0.0], [0.0, 0.0], 2.0)


def test_empirical_lambda_is_deterministic_and_worker_independent():
    a = empirical_lambda(3.0, n_samples=20_000, seed=7)
    b = empirical_lambda(3.0, n_samples=20_000, seed=7, workers=4)
    assert a == b
    assert empirical_lambda(2.0, n_samples=20_000, seed=3)[0] == pytest.approx(1.0)
