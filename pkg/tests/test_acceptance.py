"""The twelve acceptance criteria, each at its stated tolerance.

Every test stores (passed, detail) in RESULTS before asserting, and the
terminal summary hook in conftest prints one PASS/FAIL line per criterion.
"""

import itertools
import time

import numpy as np
import pytest

from singplap.asymptotics import (LayerWindow, blowup_rescale, directional_derivative_limit,
                                  fit_boundary_rate, fit_linear_profile, fit_log_correction,
                                  gradient_bound_check, sobolev_w1p0_indicator)
from singplap.barriers import barrier_power_eig, halfspace_profile, wcp_nonlinearity
from singplap.comparison import empirical_lambda, find_barrier_sandwich
from singplap.eigen import first_eigenpair
from singplap.mesh import Mesh1D
from singplap.problem import Annulus, Disk, Interval, Rectangle, ReactionSpec
from singplap.solver1d import SolverOptions, refine_and_resolve, solve_radial
from singplap.solver2d import polar_grid, solve_grid2d, tensor_grid, torsion_series
from singplap.symmetry import moving_plane_sweep, symmetry_deviation, theorem_hypotheses

from conftest import make_problem, solve_interval

RESULTS = {}
SQRT2_HALF = np.sqrt(2.0) / 2
BETAS = (0.25, 0.5, 1.0)


def record(key, ok, detail):
    RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def limits(u, gamma):
    return {b: directional_derivative_limit(u, 2.0, gamma, b).limit for b in BETAS}


def pairwise_spread(values):
    v = np.asarray(values)
    return float(v.max() / v.min() - 1.0)


@pytest.fixture(scope="module")
def strong_theta1():
    t0 = time.perf_counter()
    pr, u = solve_interval(2.0, 3.0, theta=1.0, q=1.0)
    return pr, u, time.perf_counter() - t0


def test_c01_halfspace_profile():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    t = np.geomspace(1e-6, 1e2, 200)
    worst = 0.0
    for p, gamma in zip(rng.uniform(1.1, 6.0, 20), rng.uniform(1.01, 10.0, 20)):
        worst = max(worst, float(halfspace_profile(p, gamma).ode_residual(t).max()))
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-10 and dt < 1.0,
           f"max relative ODE residual {worst:.2e} over 20 draws ({dt:.3f} s)")


def test_c02_boundary_rate():
    t0 = time.perf_counter()
    _, u = solve_interval(2.0, 3.0)
    fit = fit_boundary_rate(u, LayerWindow(1e-5, 1e-2))
    dt = time.perf_counter() - t0
    ok = 0.48 <= fit.exponent <= 0.52 and fit.r2 >= 0.999 and dt < 10
    record(2, ok, f"exponent {fit.exponent:.5f}, r2 {fit.r2:.6f} ({dt:.2f} s)")


def test_c03_directional_limit(strong_solution):
    _, u = strong_solution
    lim = limits(u, 3.0)
    dev = abs(lim[1.0] - SQRT2_HALF) / SQRT2_HALF
    spread = pairwise_spread([lim[b] / b for b in BETAS])
    record(3, dev <= 0.02 and spread <= 0.02,
           f"limit {lim[1.0]:.5f} vs {SQRT2_HALF:.5f} ({100 * dev:.2f}%), "
           f"beta spread {100 * spread:.3f}%")


def test_c04_gradient_term_independence(strong_solution, strong_theta1):
    _, u0 = strong_solution
    _, u1, dt = strong_theta1
    l0 = limits(u0, 3.0)[1.0]
    l1 = limits(u1, 3.0)[1.0]
    gap = abs(l1 - l0) / l0
    record(4, gap <= 0.03 and dt < 30,
           f"theta=0 {l0:.5f}, theta=1 {l1:.5f}, gap {100 * gap:.3f}%")


def test_c05_log_correction():
    t0 = time.perf_counter()
    _, u = solve_interval(2.0, 1.0)
    fit = fit_log_correction(u, LayerWindow(1e-6, 1e-2), 2.0)
    dt = time.perf_counter() - t0
    ok = fit.r2 >= 0.999 and fit.margin > 0 and dt < 20
    record(5, ok, f"r2 {fit.r2:.5f}, uncorrected r2 {fit.r2_linear:.4f}, "
                  f"margin {fit.margin:.4f} ({dt:.2f} s)")


def test_c06_boundedness_and_hopf():
    t0 = time.perf_counter()
    pr, u = solve_interval(2.0, 0.5)
    u_ref = refine_and_resolve(pr, u, 1)[0]
    b0 = gradient_bound_check(u, 2.0, 0.5)
    b1 = gradient_bound_check(u_ref, 2.0, 0.5)
    dt = time.perf_counter() - t0
    change = abs(b1.sup_scaled - b0.sup_scaled) / b0.sup_scaled
    hopf = abs(b1.boundary_derivative - b0.boundary_derivative) / b0.boundary_derivative
    ok = (change < 0.01 and b0.boundary_derivative > 0 and b1.boundary_derivative > 0
          and hopf < 0.01 and dt < 10)
    record(6, ok, f"max|u'| change {100 * change:.4f}%, u'(0+) {b0.boundary_derivative:.5f} -> "
                  f"{b1.boundary_derivative:.5f} ({dt:.2f} s)")


def test_c07_sobolev_threshold():
    t0 = time.perf_counter()
    shells = np.geomspace(1e-2, 1e-6, 9)
    fitted = {}
    for gamma in (2.5, 3.5):
        _, u = solve_interval(2.0, gamma)
        fitted[gamma] = sobolev_w1p0_indicator(u, 2.0, shells).shell_exponent
    dt = time.perf_counter() - t0
    pred = {2.5: 1 / 7, 3.5: -1 / 9}
    err = max(abs(fitted[g] - pred[g]) for g in pred)
    ok = fitted[2.5] > 0 > fitted[3.5] and err <= 0.05 and dt < 30
    record(7, ok, f"shell exponents {fitted[2.5]:+.4f} (pred {pred[2.5]:+.4f}), "
                  f"{fitted[3.5]:+.4f} (pred {pred[3.5]:+.4f})")


def test_c08_blowup(strong_solution, critical_solution):
    _, u3 = strong_solution
    _, u1 = critical_solution
    prof = halfspace_profile(2.0, 3.0)
    sup, r2 = [], []
    for delta in (1e-2, 1e-3, 1e-4):
        w = blowup_rescale(u3, delta, 2.0, 3.0)
        ref = prof(w.x)
        sup.append(float(np.max(np.abs(w.values - ref)) / np.max(ref)))
        r2.append(fit_linear_profile(blowup_rescale(u1, delta, 2.0, 1.0)).r2)
    ok = max(sup) <= 0.03 and min(r2) >= 0.999
    record(8, ok, "gamma=3 sup errors " + ", ".join(f"{100 * s:.3f}%" for s in sup)
           + "; gamma=1 r2 " + ", ".join(f"{r:.5f}" for r in r2))


def test_c09_auxiliary_machinery():
    t0 = time.perf_counter()
    worst_zero, worst_fd, count = 0.0, np.inf, 0
    for c, th, g, p in itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (0.5, 1.0, 2.0),
                                         (1.5, 2.0, 3.0)):
        _, ts = wcp_nonlinearity(0.5, c, th, g, p)
        worst_zero = max(worst_zero, abs(wcp_nonlinearity(ts, c, th, g, p)[0]))
        t = np.linspace(ts, 1.0, 1002)[1:-1]
        h = 1e-7 * np.minimum(t - ts, 1 - t)
        fd = (wcp_nonlinearity(t + h, c, th, g, p)[0]
              - wcp_nonlinearity(t - h, c, th, g, p)[0]) / (2 * h)
        worst_fd = min(worst_fd, float(fd.min()))
        count += 1
    lam = {}
    for p in (1.5, 2.0, 3.0, 4.0):
        lam[p] = (empirical_lambda(p, n_samples=100_000, seed=0)[0],
                  empirical_lambda(p, n_samples=100_000, seed=1)[0])
    dt = time.perf_counter() - t0
    seeds_ok = all(min(a, b) > 0 and abs(a - b) <= 0.1 * max(a, b) for a, b in lam.values())
    ok = count == 81 and worst_zero <= 1e-12 and worst_fd > 0 and seeds_ok and dt < 10
    record(9, ok, f"{count} grid points, max |value at t*| {worst_zero:.1e}, "
                  f"min FD slope {worst_fd:.3e}; lambda "
                  + ", ".join(f"p={p}: {a:.4f}/{b:.4f}" for p, (a, b) in lam.items()))


def test_c10_barrier_sandwich(strong_solution):
    t0 = time.perf_counter()
    _, u = strong_solution
    eig = first_eigenpair(2.0, u.domain, u.mesh)
    res = find_barrier_sandwich(u, lambda s: barrier_power_eig(s, 2.0, 3.0, eig), tol=1e-8)
    dt = time.perf_counter() - t0
    ok = res.ok and res.s_lower < res.s_upper and dt < 20
    record(10, ok, f"s_lower {res.s_lower:.4f} < s_upper {res.s_upper:.4f}, inequalities "
                   f"{res.lower_inequality.verdict}/{res.upper_inequality.verdict} ({dt:.2f} s)")


def test_c11_disk_symmetry():
    t0 = time.perf_counter()
    pr = make_problem(2.0, 2.0, theta=1.0, q=1.0, reaction=ReactionSpec.constant(1.0),
                      domain=Disk(1.0))
    hyp = theorem_hypotheses(pr)
    rs = Mesh1D.geometric(0.0, 1.0, 128, 1.15, 1e-6, sides=("right",))
    u = solve_grid2d(pr, polar_grid(Disk(1.0), rs, 64))
    tol = 10 * SolverOptions().tol
    dev, frac = symmetry_deviation(u, tol=tol)
    sweep = moving_plane_sweep(u, tol=tol, problem=pr)
    dt = time.perf_counter() - t0
    ok = (hyp["satisfied"] and dev <= tol and frac == 0
          and abs(sweep.lambda0) <= sweep.spacing and dt < 300)
    record(11, ok, f"deviation {dev:.1e} (tol {tol:.0e}), lambda0 {sweep.lambda0:.3f} "
                   f"(spacing {sweep.spacing:.3f}), violations {frac:.0%} ({dt:.2f} s)")


def test_c12_solver_sanity():
    torsion = lambda dom: make_problem(2.0, 1.0, reaction=ReactionSpec.constant(1.0), domain=dom)
    m = Mesh1D.geometric(0.0, 1.0, 512, 1.1, 1e-5)
    u = solve_radial(torsion(Interval(1.0)), m, singular=False)
    err1 = float(np.max(np.abs(u.values - m.nodes * (1 - m.nodes) / 2)))

    rect = Rectangle(1.0, 1.0)
    errs2 = []
    for n in (16, 32, 64):
        g = tensor_grid(rect, np.linspace(-0.5, 0.5, n + 1), np.linspace(-0.5, 0.5, n + 1))
        v = solve_grid2d(torsion(rect), g, singular=False)
        errs2.append(float(np.max(np.abs(v.values - torsion_series(rect, g.x, g.y)))))
    order2 = float(np.log2(errs2[-2] / errs2[-1]))

    ann = Annulus(1.0, 2.0, 2)
    exact = lambda r: -r**2 / 4 + 3 / (4 * np.log(2)) * np.log(r) + 0.25
    pa = torsion(ann)
    w = solve_radial(pa, Mesh1D.uniform(1.0, 2.0, 32), singular=False)
    fields = [w] + refine_and_resolve(pa, w, 2, singular=False)
    errs_a = [float(np.max(np.abs(f.values - exact(f.x)))) for f in fields]
    order_a = float(np.log2(errs_a[-2] / errs_a[-1]))

    ok = err1 <= 1e-8 and errs2[-1] <= 1e-4 and order2 >= 1.9 and order_a >= 1.9
    record(12, ok, f"1D error {err1:.1e}; 2D error {errs2[-1]:.1e}, order {order2:.2f}; "
                   f"annulus order {order_a:.2f}")
