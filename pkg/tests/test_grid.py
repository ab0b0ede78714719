import numpy as np
import pytest

from s3crunch.errors import ConfigError, PoleRegularityViolation
from s3crunch.evolution import low_mode
from s3crunch.frame import FRAME_MATRICES, ROUND_VOLUME
from s3crunch.grid import HopfGrid


def smooth(y):
    y = y / 3.0
    return np.sin(y[..., 0] + 0.5 * y[..., 3]) + y[..., 1] * y[..., 2]


def smooth_frame_derivative(y):
    """Exact Z_A smooth, using the ambient gradient and Z_A = M_A y."""
    u = y / 3.0
    c = np.cos(u[..., 0] + 0.5 * u[..., 3])
    grad = np.stack([c, u[..., 2], u[..., 1], 0.5 * c], axis=-1) / 3.0
    return np.stack([np.sum(grad * (y @ m.T), axis=-1) for m in FRAME_MATRICES])


def grad_error(n, order):
    g = HopfGrid(n, n, n, fd_order=order)
    y = g.points()
    return np.abs(g.grad(smooth(y)) - smooth_frame_derivative(y)).max()


def test_volume_quadrature_is_second_order():
    # midpoint rule in eta: the relative error for a constant is h / sin(h) - 1
    errs = []
    for n in (12, 24):
        g = HopfGrid(n, 8, 8)
        errs.append(g.integrate(np.ones(g.shape)) / ROUND_VOLUME - 1.0)
        assert errs[-1] == pytest.approx(g.d_eta / np.sin(g.d_eta) - 1.0, rel=1e-9)
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_degree_two_harmonic_has_zero_mean():
    g = HopfGrid(10, 8, 8)
    assert abs(g.integrate(g.sample(low_mode))) < 1e-12


@pytest.mark.parametrize("order", [2, 4])
def test_grid_derivative_converges(order):
    e1, e2 = grad_error(12, order), grad_error(24, order)
    assert np.log2(e1 / e2) == pytest.approx(order, abs=0.5)


def test_restriction_is_exact_for_low_modes():
    fine, coarse = HopfGrid(24, 24, 24), HopfGrid(12, 12, 12)
    f = fine.sample(low_mode)
    assert np.abs(fine.restrict_to(f, coarse) - coarse.sample(low_mode)).max() < 1e-13


def test_restriction_to_non_divisor_grid():
    fine, coarse = HopfGrid(24, 24, 24), HopfGrid(16, 16, 16)
    assert np.abs(fine.restrict_to(fine.sample(low_mode), coarse) - coarse.sample(low_mode)).max() < 1e-13


def test_pole_regular_field_passes():
    g = HopfGrid(16, 16, 16)
    f = g.sample(smooth)
    assert g.pole_defect(f) < 0.1
    g.apply_Z(1, f)


def test_pole_irregular_field_is_rejected():
    g = HopfGrid(16, 16, 16)
    e, x1, x2 = g.mesh()
    bad = np.cos(x2) + 0.0 * e  # depends on xi2 all the way into eta = 0
    with pytest.raises(PoleRegularityViolation):
        g.apply_Z(2, bad)


def test_dissipation_kills_constants():
    g = HopfGrid(12, 12, 12, fd_order=4)
    assert np.abs(g.dissipation(np.full(g.shape, 2.5), 0.1)).max() < 1e-12


def test_odd_angle_count_rejected():
    with pytest.raises(ConfigError):
        HopfGrid(8, 7, 8)
