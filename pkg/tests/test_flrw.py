import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from s3crunch.errors import OutOfDomain
from s3crunch.flrw import (LATE_SCALE_THRESHOLD, crunch_time_oracle, crunch_time_quadrature,
                           first_integral_residual, power_integral_bound, solve_scale_factor,
                           time_integral_power)

# 3 sqrt(pi) Gamma(3/4) / Gamma(1/4), evaluated with mpmath at 30 digits
T_CRUNCH = 1.7972103521033883


def exact_log_time(a):
    """int_0^t a^{-1} in closed form: with s = sqrt(1 - a^{4/3}) it equals (3/2) ln(1 + s) - ln a."""
    s = np.sqrt(1.0 - np.asarray(a) ** (4.0 / 3.0))
    return 1.5 * np.log1p(s) - np.log(a)


def test_oracle_matches_frozen_value():
    assert crunch_time_oracle() == pytest.approx(T_CRUNCH, abs=1e-15)


def test_three_routes_to_the_crunch_time(bg):
    q = crunch_time_quadrature()
    assert abs(bg.t_crunch - T_CRUNCH) < 1e-10
    assert abs(q - T_CRUNCH) < 1e-12


def test_first_integral_drift_is_tiny(bg):
    assert bg.first_integral_drift() < 1e-12


def test_log_time_against_closed_form(bg):
    t = 0.5 * (bg.t_grid[1:] + bg.t_grid[:-1])
    err = bg.log_time_at(t) - exact_log_time(bg.scale(t))
    assert np.abs(err).max() < 1e-9


def test_scale_factor_hits_floor_with_unit_slope(bg):
    a, ap, _ = bg.eval(bg.t_max)
    assert a == pytest.approx(1e-6, rel=1e-6)
    assert ap == pytest.approx(-1.0, abs=1e-7)


def test_time_of_scale_inverts_scale(bg):
    for a in (0.9, 0.3, 1e-2, 1e-5):
        assert bg.scale(bg.time_of_scale(a)) == pytest.approx(a, rel=1e-10)


def test_out_of_range_time_raises(bg):
    with pytest.raises(OutOfDomain):
        bg.eval(bg.t_max + 1e-3)
    with pytest.raises(OutOfDomain):
        bg.time_of_scale(2.0)


def test_late_slope_window(bg):
    t = bg.time_of_scale(LATE_SCALE_THRESHOLD)
    _, ap, _ = bg.eval(t)
    assert ap == pytest.approx(-6.0 / 7.0, rel=1e-9)
    assert bg.monotonicity_window() > 0


def test_power_integral_closed_form(bg):
    # int_0^T a^{1/3} dt = int_0^1 a^{1/3} / sqrt(1 - a^{4/3}) da = 3/2
    assert time_integral_power(bg, 1.0 / 3.0, 0.0, bg.t_max) == pytest.approx(1.5, rel=1e-6)


@given(p=st.sampled_from([-2.0, -1.0, -0.5, 0.0, 1.0]), frac=st.floats(0.05, 0.95))
def test_power_integral_bound_holds(bg, p, frac):
    t1 = 0.1
    t2 = t1 + frac * (bg.time_of_scale(1e-4) - t1)
    assert time_integral_power(bg, p, t1, t2) <= power_integral_bound(bg, p, t1, t2) * (1 + 1e-9)


@given(a=st.floats(1e-6, 1.0))
def test_first_integral_residual_vanishes_on_exact_curve(a):
    ap = -math.sqrt(1.0 - a ** (4.0 / 3.0))
    assert abs(first_integral_residual(a, ap)) < 1e-14


def test_looser_tolerance_still_consistent():
    bg = solve_scale_factor(rel_tol=1e-9, abs_tol=1e-12)
    assert abs(bg.t_crunch - T_CRUNCH) < 1e-7
