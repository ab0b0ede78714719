import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from s3crunch import tensors as T
from s3crunch.errors import SingularMetric
from s3crunch.frame import FrameGeometry
from s3crunch.state import flrw_state, spatial_geometry

small = st.floats(-0.3, 0.3)
mat3 = arrays(np.float64, (3, 3), elements=small)
diag_s = arrays(np.float64, (3,), elements=st.floats(0.4, 2.5))


def spd(m):
    return np.eye(3) + 0.5 * (m + m.T)


def geometry(G):
    st_ = flrw_state().with_(G=G, G_inv=np.linalg.inv(G))
    return spatial_geometry(st_, FrameGeometry())


def milnor_ricci(g, n=2.0 / 3.0):
    """Ricci eigenvalues of the diagonal left-invariant metric diag(g) on SU(2).

    In the orthonormal frame the structure constants are lambda_i = n g_i / sqrt(g1 g2 g3),
    and Ric(E_i, E_i) = 2 mu_j mu_k with mu_i = (lambda_1 + lambda_2 + lambda_3)/2 - lambda_i.
    """
    lam = n * g / np.sqrt(np.prod(g))
    mu = 0.5 * lam.sum() - lam
    return 2.0 * np.array([mu[1] * mu[2], mu[0] * mu[2], mu[0] * mu[1]])


@given(diag_s)
def test_ricci_matches_milnor_for_diagonal_metrics(g):
    sg = geometry(np.diag(g))
    assert np.allclose(np.diag(sg.ric_sharp), milnor_ricci(g), rtol=1e-12, atol=1e-13)
    assert sg.scalar == pytest.approx(milnor_ricci(g).sum(), rel=1e-12, abs=1e-13)
    off = sg.ric_sharp - np.diag(np.diag(sg.ric_sharp))
    assert np.abs(off).max() < 1e-13


@given(diag_s, st.floats(0.2, 5.0))
def test_ricci_sharp_scales_inversely(g, lam):
    r1 = geometry(np.diag(g)).ric_sharp
    r2 = geometry(lam * np.diag(g)).ric_sharp
    assert np.allclose(r2, r1 / lam, rtol=1e-11, atol=1e-14)


@given(mat3, st.integers(0, 10_000))
def test_ricci_is_rotation_covariant(m, seed):
    # eps_ABC is SO(3)-invariant, so rotating the frame rotates Ric
    R = Rotation.random(random_state=seed).as_matrix()
    G = spd(m)
    r1 = geometry(G).ric_sharp
    r2 = geometry(R.T @ G @ R).ric_sharp
    assert np.allclose(r2, R.T @ r1 @ R, atol=1e-12)


def test_two_curvature_routes_agree():
    G = spd(np.array([[0.2, 0.1, 0.0], [0.0, -0.1, 0.05], [0.1, 0.0, 0.15]]))
    _, ric_sharp, R = T.curvature_frame(G)
    sg = geometry(G)
    assert np.allclose(ric_sharp, sg.ric_sharp, atol=1e-14)
    assert R == pytest.approx(float(sg.scalar), abs=1e-14)


def test_round_metric_is_killing_for_the_frame():
    G = T.round_metric()
    LG = np.stack([T.lie_derivative(G, "ll", np.zeros((3,) + G.shape))[A] for A in range(3)])
    assert np.abs(LG).max() < 1e-15


@given(mat3, mat3)
def test_lie_derivative_leibniz(m1, m2):
    G, K = spd(m1), m2
    dz = np.zeros((3, 3, 3))
    LG = T.lie_derivative(G, "ll", dz)
    LK = T.lie_derivative(K, "ul", dz)
    GK = np.einsum("ij,jk->ik", G, K)
    LGK = T.lie_derivative(GK, "ll", dz)
    assert np.allclose(LGK, np.einsum("aij,jk->aik", LG, K) + np.einsum("ij,ajk->aik", G, LK), atol=1e-13)


@given(mat3)
def test_inverse_and_det(m):
    G = spd(m)
    assert np.allclose(T.mm(G, T.inverse(G)), np.eye(3), atol=1e-12)
    assert T.det(G) == pytest.approx(np.linalg.det(G), rel=1e-12)


def test_inverse_refuses_singular_metric():
    with pytest.raises(SingularMetric):
        T.inverse(np.diag([1.0, 1.0, 1e-14]))


@given(mat3)
def test_norm_of_mixed_tensor_is_frobenius_in_orthonormal_metric(m):
    assert T.norm_sq(m, "ul", np.eye(3), np.eye(3)) == pytest.approx(np.sum(m ** 2), rel=1e-12, abs=1e-15)
