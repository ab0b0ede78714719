import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from s3crunch import currents as C
from s3crunch.diagnostics import divergence_identity_residual
from s3crunch.evolution import PerturbationSpec, make_initial_data, rhs_rescaled, step
from s3crunch.frame import FrameGeometry
from s3crunch.state import flrw_state, spatial_geometry

sym_s = arrays(np.float64, (3, 3), elements=st.floats(-0.25, 0.25))


def geometry(G):
    s = flrw_state().with_(G=G, G_inv=np.linalg.inv(G))
    return s, spatial_geometry(s, FrameGeometry())


@given(sym_s, sym_s)
def test_ricci_variation_matches_finite_difference(m, n):
    G = np.eye(3) + 0.5 * (m + m.T)
    h = n + n.T
    _, sg = geometry(G)
    Gi = np.linalg.inv(G)
    e = 1e-4
    fd = (geometry(G + e * h)[1].ric_sharp - geometry(G - e * h)[1].ric_sharp) / (2 * e)
    var = C.principal_ricci_variation(h, G, Gi, sg.gam) + C.ricci_variation_error(h, Gi, sg.ric_sharp, sg.scalar)
    assert np.abs(fd - var).max() < 1e-6 * max(1.0, np.abs(fd).max())


@given(sym_s)
def test_commuted_ricci_splits_into_principal_and_error(m):
    G = np.eye(3) + 0.5 * (m + m.T)
    s, sg = geometry(G)
    LRic = C.lie_all(sg.ric_sharp, "ul")
    LG = C.lie_all(G, "ll")
    for A in range(3):
        P = C.principal_ricci_variation(LG[A], G, s.G_inv, sg.gam)
        N = C.ricci_variation_error(LG[A], s.G_inv, sg.ric_sharp, sg.scalar)
        assert np.abs(LRic[A] - P - N).max() < 1e-13


def test_metric_current_hand_value():
    # G = I, K = diag(k, -k, 0): (Lie_A K)^c_j = (2/3) eps_Ajc (k_j - k_c), Lie G = 0
    k = 0.03
    K = np.diag([k, -k, 0.0])
    LK = C.lie_all(K, "ul")
    total = sum(C.metric_current_zero(LK[A], np.zeros((3, 3, 3)), np.eye(3), np.eye(3), 0.5) for A in range(3))
    assert total == pytest.approx((16.0 / 3.0) * k ** 2, rel=1e-13)


def test_identity_terms_vanish_on_flrw(bg):
    s = flrw_state(0.7)
    rate, _ = rhs_rescaled(s, bg, FrameGeometry(), psi=s.psi)
    for A in range(3):
        assert all(abs(float(v)) < 1e-15 for v in C.metric_identity_terms(s, rate, bg, A).values())
    assert all(abs(float(v)) < 1e-15 for v in C.sf_identity_terms(s, rate, bg).values())


def test_error_term_names_are_reported(bg):
    s = make_initial_data(PerturbationSpec(amplitude=1e-2), bg, FrameGeometry(), t0=0.5)
    rate, _ = rhs_rescaled(s, bg, FrameGeometry(), psi=s.psi)
    names = set(C.metric_identity_terms(s, rate, bg, 0))
    assert set(C.METRIC_ERROR_TERMS) <= names


@pytest.mark.parametrize("which", ["metric", "sf"])
def test_single_window_identity_converges(bg, which):
    hom = FrameGeometry()
    s = make_initial_data(PerturbationSpec(amplitude=1e-2, g_shape=(1.0, -0.5, -0.5),
                                           k_shape=(1.0, -0.5, -0.5)), bg, hom, t0=0.5)
    res = []
    for h in (2e-3, 1e-3):
        window = [step(s, -h, bg, hom), s, step(s, h, bg, hom)]
        res.append(divergence_identity_residual(window, bg, which=which))
    assert res[1] < 1e-5
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.2)


def test_grid_states_are_refused():
    s = flrw_state(0.0, (4, 4, 4))
    with pytest.raises(ValueError, match="homogeneous"):
        C.metric_current_density(s, None)
