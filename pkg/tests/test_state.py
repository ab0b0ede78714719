import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from s3crunch import tensors as T
from s3crunch.errors import ConstraintInfeasible, DegenerateScale
from s3crunch.evolution import PerturbationSpec, make_initial_data
from s3crunch.frame import ROUND_VOLUME, FrameGeometry
from s3crunch.grid import HopfGrid
from s3crunch.state import (SQRT23, RescaledState, cmc_defect, constraint_residuals,
                            flrw_state, high_norm_truncated, norm_comparison_constant, psi_root,
                            rescale, sobolev_round, unrescale)

small = st.floats(-0.2, 0.2)


@st.composite
def states(draw):
    m = draw(arrays(np.float64, (3, 3), elements=small))
    G = np.eye(3) + 0.5 * (m + m.T)
    K = draw(arrays(np.float64, (3, 3), elements=small))
    K = K - np.trace(K) / 3.0 * np.eye(3)
    Phi = draw(arrays(np.float64, (3,), elements=small))
    return RescaledState(t=draw(st.floats(0.0, 1.7)), G=G, G_inv=np.linalg.inv(G), Khat=K,
                         psi=np.array(draw(small)), Psi=np.array(draw(small)), Phi=Phi)


@given(states())
def test_rescale_round_trip(bg, s):
    back = rescale(unrescale(s, bg), bg)
    for name in ("G", "G_inv", "Khat", "psi", "Psi", "Phi"):
        assert np.allclose(getattr(back, name), getattr(s, name), rtol=1e-11, atol=1e-12), name


@given(states())
def test_trace_free_K_means_cmc(bg, s):
    assert cmc_defect(unrescale(s, bg), bg) < 1e-12


@pytest.mark.parametrize("t", [0.0, 0.7, 1.5, 1.79])
def test_flrw_physical_hamiltonian_constraint(bg, t):
    # R - |k|^2 + (tr k)^2 = (dt phi)^2 + |grad phi|^2 holds only through (a')^2 + a^{4/3} = 1
    a, _, _ = bg.eval(t)
    p = unrescale(flrw_state(t), bg)
    R_phys = (2.0 / 3.0) * a ** (-2.0 / 3.0)
    k = p.k
    lhs = R_phys - np.trace(k @ k) + np.trace(k) ** 2
    assert lhs == pytest.approx(float(p.dt_phi) ** 2, rel=1e-9)
    assert np.allclose(p.n, 1.0)


def test_flrw_state_satisfies_rescaled_constraints(bg, hom):
    ham, mom = constraint_residuals(flrw_state(0.3), bg, hom)
    assert abs(ham) < 1e-15 and np.abs(mom).max() < 1e-15


@given(st.floats(-0.6, 10.0))
def test_psi_root_solves_quadratic(C):
    p = psi_root(C)
    assert p ** 2 + 2 * SQRT23 * p == pytest.approx(C, rel=1e-12, abs=1e-15)


def test_psi_root_small_argument_has_no_cancellation():
    assert psi_root(1e-20) == pytest.approx(1e-20 / (2 * SQRT23), rel=1e-12)


def test_psi_root_infeasible():
    with pytest.raises(ConstraintInfeasible):
        psi_root(-0.7)


def test_rescale_refuses_crunch(bg):
    s = flrw_state(bg.t_max)
    with pytest.raises(DegenerateScale):
        unrescale(s, bg)


@pytest.mark.parametrize("amp", [1e-3, 3e-2])
def test_initial_data_satisfies_constraints_homogeneous(bg, hom, amp):
    s = make_initial_data(PerturbationSpec(amplitude=amp), bg, hom)
    ham, mom = constraint_residuals(s, bg, hom)
    assert abs(ham) < 1e-15 and np.abs(mom).max() < 1e-15
    assert s.trace_defect() < 1e-15


def test_initial_data_satisfies_constraints_on_grid(bg):
    geom = FrameGeometry(grid=HopfGrid(8, 8, 8, fd_order=2), fd_order=2)
    s = make_initial_data(PerturbationSpec(grid_amplitude=0.05), bg, geom)
    ham, mom = constraint_residuals(s, bg, geom)
    assert np.abs(ham).max() < 1e-14
    assert np.abs(mom).max() == 0.0


def test_combined_perturbation_leaves_product_sized_momentum_residual(bg):
    geom = FrameGeometry(grid=HopfGrid(8, 8, 8, fd_order=2), fd_order=2)
    s = make_initial_data(PerturbationSpec(amplitude=1e-2, grid_amplitude=0.05), bg, geom)
    _, mom = constraint_residuals(s, bg, geom)
    assert 0.0 < np.abs(mom).max() < 1e-2 * 0.05


def test_sobolev_norm_of_constant(hom):
    assert sobolev_round(np.array(2.0), "", 2, hom) == pytest.approx(2.0 * np.sqrt(ROUND_VOLUME))


def test_high_norm_vanishes_on_flrw(bg, hom):
    assert high_norm_truncated(flrw_state(0.4), 1, bg, hom) == 0.0


@given(states())
def test_norm_comparison_bounds_one_forms(s):
    C = norm_comparison_constant(s)
    v = np.array([0.3, -0.2, 0.5])
    n = float(T.norm(v, "l", s.G, s.G_inv))
    assert np.linalg.norm(v) / C <= n * (1 + 1e-12)
    assert n <= C * np.linalg.norm(v) * (1 + 1e-12)

