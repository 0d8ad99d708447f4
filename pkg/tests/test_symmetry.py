import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singplap.errors import AsymmetricDomain
from singplap.mesh import Mesh1D
from singplap.problem import Disk, Rectangle, ReactionSpec
from singplap.solver2d import SolutionField2D, polar_grid, solve_grid2d, tensor_grid
from singplap.symmetry import (PlanePosition, interpolate_field, moving_plane_sweep, reflect,
                               symmetry_deviation, theorem_hypotheses)

from conftest import make_problem

RECT = Rectangle(2.0, 1.0)
TGRID = tensor_grid(RECT, np.linspace(-1, 1, 33), np.linspace(-0.5, 0.5, 17))
PGRID = polar_grid(Disk(1.0), np.linspace(0, 1, 33), 32)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-0.99, 0.99), st.floats(-0.49, 0.49))
@settings(max_examples=50, deadline=None)
def test_tensor_interpolation_reproduces_quadratics(a, b, c, px, py):
    fn = lambda x, y: a * x * x + b * x * y + c * y * y + x - 2
    f = SolutionField2D.from_function(TGRID, fn)
    assert interpolate_field(f, px, py)[0] == pytest.approx(fn(px, py), abs=1e-12)


@given(st.floats(0.0, 0.99), st.floats(0, 2 * np.pi))
@settings(max_examples=50, deadline=None)
def test_polar_interpolation_reproduces_radial_quadratics(r, t):
    f = SolutionField2D.from_function(PGRID, lambda x, y: 1 - 0.7 * (x * x + y * y))
    assert f.interpolate(r * np.cos(t), r * np.sin(t))[0] == pytest.approx(1 - 0.7 * r * r,
                                                                            abs=1e-12)


def test_reflect_and_plane_position():
    f = SolutionField2D.from_function(TGRID, lambda x, y: x + 3 * y)
    lam = -0.5
    fr = reflect(f, lam)
    cap = fr.meta["cap"]
    assert np.allclose(fr.values[cap], 2 * lam - TGRID.x[cap] + 3 * TGRID.y[cap])
    assert np.all(np.isnan(fr.values[TGRID.x > 0.01]))
    with pytest.raises(ValueError):
        PlanePosition.of(TGRID, 0.3)


def paraboloid(centre):
    return lambda x, y: 1.0 - (x - centre[0]) ** 2 - (y - centre[1]) ** 2


def test_sweep_on_radial_field_reaches_the_centre():
    f = SolutionField2D.from_function(PGRID, paraboloid((0.0, 0.0)))
    rep = moving_plane_sweep(f, tol=1e-10)
    assert rep.lambda0 == 0.0
    assert np.all(rep.min_difference >= -1e-10)


def test_sweep_stops_at_a_translated_maximum():
    # u_λ - u = -4 (x1 - λ)(λ + 0.1) on the cap: negative once λ > -0.1
    f = SolutionField2D.from_function(PGRID, paraboloid((-0.1, 0.0)))
    lams = np.linspace(-1.0, 0.0, 41)
    rep = moving_plane_sweep(f, lams, tol=1e-10)
    assert -0.1 - 0.025 - 1e-12 <= rep.lambda0 <= -0.1 + 1e-12
    assert rep.min_difference[-1] < -1e-3


def test_symmetry_deviation_detects_asymmetry():
    sym = SolutionField2D.from_function(PGRID, paraboloid((0.0, 0.0)))
    dev, frac = symmetry_deviation(sym)
    assert dev < 1e-12 and frac == 0.0
    shifted = SolutionField2D.from_function(PGRID, paraboloid((-0.1, 0.0)))
    dev, frac = symmetry_deviation(shifted)
    assert dev > 0.1 and frac > 0


def test_symmetry_deviation_domain_checks():
    f = SolutionField2D.from_function(TGRID, lambda x, y: 0 * x)
    assert symmetry_deviation(f, angle=np.pi / 2)[0] == 0.0
    with pytest.raises(AsymmetricDomain):
        symmetry_deviation(f, angle=np.pi / 4)


def test_hypotheses_and_solved_disk_symmetry():
    pr = make_problem(2.0, 3.0, theta=1.0, q=1.0, reaction=ReactionSpec.constant(1.0),
                      domain=Disk(1.0))
    assert theorem_hypotheses(pr)["satisfied"]
    rs = Mesh1D.geometric(0.0, 1.0, 96, 1.15, 1e-5, sides=("right",))
    u = solve_grid2d(pr, polar_grid(Disk(1.0), rs, 32))
    rep = moving_plane_sweep(u, tol=1e-9, problem=pr)
    assert rep.lambda0 == 0.0
    dev, frac = symmetry_deviation(u, tol=1e-9)
    assert dev < 1e-9 and frac == 0.0


def test_failed_hypotheses_warn():
    pr = make_problem(2.0, 3.0, domain=Rectangle(2.0, 1.0))
    assert not theorem_hypotheses(pr)["satisfied"]
    f = SolutionField2D.from_function(TGRID, lambda x, y: (1 - x * x) * (0.25 - y * y))
    with pytest.warns(UserWarning):
        rep = moving_plane_sweep(f, problem=pr)
    assert rep.lambda0 == 0.0
