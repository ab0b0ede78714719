import numpy as np
import pytest
from hypothesis import given, strategies as st

from s3crunch.errors import DegenerateCoefficient
from s3crunch.evolution import PerturbationSpec, low_mode, make_initial_data
from s3crunch.frame import FrameGeometry
from s3crunch.grid import HopfGrid
from s3crunch.lapse import (LapseStats, laplacian_operator, lapse_problem, maximum_principle_check,
                            solve_elliptic, solve_lapse, solve_lapse_elliptic, solve_lapse_homogeneous)
from s3crunch.state import constraint_residuals, flrw_state

# degree-2 harmonic polynomials restrict to eigenfunctions of the radius-3 sphere:
# Lap f = -l (l + 2) / 9 f with l = 2
EIGEN_L2 = -8.0 / 9.0


def grid_geom(n, order=2):
    return FrameGeometry(grid=HopfGrid(n, n, n, fd_order=order), fd_order=order)


def test_flrw_lapse_is_zero(bg, hom):
    assert solve_lapse(flrw_state(0.5), bg, hom) == 0.0


@given(st.floats(0.0, 1.7), st.floats(-0.05, 0.05))
def test_homogeneous_lapse_solves_its_equation(bg, t, k):
    s = flrw_state(t).with_(Khat=np.diag([k, -k, 0.0]), Psi=np.array(0.01 * k))
    psi = solve_lapse_homogeneous(s, bg)
    prob = lapse_problem(s, bg)
    assert -prob.a ** (4 / 3) * prob.f * psi == pytest.approx(prob.rhs_high, rel=1e-12, abs=1e-18)


def test_round_laplacian_eigenfunction():
    # composed first-derivative stencils lose one order next to the chart poles,
    # where the frame coefficients grow like 1/eta; away from them the order is full
    glob, inner = [], []
    for n in (12, 24):
        geom = grid_geom(n)
        f = geom.grid.sample(low_mode)
        lap = laplacian_operator(flrw_state(0.0, geom.grid.shape), geom)
        err = np.abs(lap(f) - EIGEN_L2 * f)
        band = (geom.grid.eta > 0.4) & (geom.grid.eta < np.pi / 2 - 0.4)
        glob.append(err.max())
        inner.append(err[band].max())
    assert np.log2(inner[0] / inner[1]) == pytest.approx(2.0, abs=0.5)
    assert np.log2(glob[0] / glob[1]) > 0.8


@pytest.mark.parametrize("order", [2, 4])
def test_manufactured_elliptic_solution_converges(order):
    s_lap, c = 0.3, 0.8
    errs = []
    for n in (8, 16):
        geom = grid_geom(n, order)
        exact = geom.grid.sample(low_mode)
        rhs = (s_lap * EIGEN_L2 - c) * exact
        psi = solve_elliptic(flrw_state(0.0, geom.grid.shape), geom, s_lap, np.full(geom.grid.shape, c), rhs,
                             solver_tol=1e-12)
        errs.append(np.abs(psi - exact).max())
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.5)


def test_preconditioned_solver_converges_quickly():
    geom = grid_geom(12, 4)
    stats = LapseStats()
    rhs = geom.grid.sample(low_mode) + 0.3
    solve_elliptic(flrw_state(0.0, geom.grid.shape), geom, 0.5, np.full(geom.grid.shape, 0.7), rhs,
                   solver_tol=1e-10, stats=stats)
    assert stats.residual < 1e-9
    assert stats.iterations < 30


def test_maximum_principle_bound(bg):
    geom = grid_geom(12)
    rhs = 0.2 + geom.grid.sample(low_mode)
    coeff = np.full(geom.grid.shape, 0.9)
    psi = solve_elliptic(flrw_state(0.0, geom.grid.shape), geom, 0.4, coeff, rhs, solver_tol=1e-12)
    rep = maximum_principle_check(psi, rhs, coeff)
    assert rep.passed and rep.sup_psi > 0.0


def test_high_and_low_lapse_agree_on_constraint_satisfying_data(bg):
    geom = grid_geom(12, 4)
    s = make_initial_data(PerturbationSpec(grid_amplitude=0.05), bg, geom, t0=0.6)
    hi = solve_lapse_elliptic(s, bg, geom, "HIGH", solver_tol=1e-12)
    lo = solve_lapse_elliptic(s, bg, geom, "LOW", solver_tol=1e-12)
    ham, _ = constraint_residuals(s, bg, geom)
    assert np.abs(ham).max() < 1e-14
    assert np.abs(hi - lo).max() < 1e-10 * max(1.0, np.abs(hi).max())


def test_high_lapse_matches_homogeneous_formula_on_constant_data(bg):
    geom = grid_geom(8)
    spec = PerturbationSpec(amplitude=1e-2)
    s_grid = make_initial_data(spec, bg, geom, t0=0.4)
    s_hom = make_initial_data(spec, bg, FrameGeometry(), t0=0.4)
    assert np.allclose(s_grid.psi, float(s_hom.psi), rtol=1e-9, atol=1e-14)


def test_degenerate_coefficient_raises(bg):
    # a' = 0 at t = 0 and Psi chosen to cancel the remaining terms
    s = flrw_state(0.0).with_(Psi=np.array(-np.sqrt(2.0 / 3.0)))
    with pytest.raises(DegenerateCoefficient):
        solve_lapse_homogeneous(s, bg, f_floor=1.0)
