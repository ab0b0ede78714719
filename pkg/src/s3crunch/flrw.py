"""Friedmann background for the stiff (massless scalar field) FLRW solution.

The scale factor solves a'' = -(2/3) a^{1/3} with a(0) = 1, a'(0) = 0 and
collapses linearly at the crunch time.  Everything downstream reads a(t),
a'(t) from the tabulated background built here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import InvariantViolation, NonConvergence, OutOfDomain

# a' lies in [-1, -6/7] exactly when a^{4/3} <= 13/49
LATE_SLOPE_BOUND = -6.0 / 7.0
LATE_SCALE_THRESHOLD = (13.0 / 49.0) ** 0.75


def friedmann_rhs(t: float, y: np.ndarray) -> list[float]:
    a, ap, _ = y
    return [ap, -(2.0 / 3.0) * np.cbrt(a), 1.0 / a]


def first_integral_residual(a, a_prime):
    """(a')^2 + a^{4/3} - 1, zero along exact solutions."""
    a = np.asarray(a, dtype=float)
    return np.asarray(a_prime, dtype=float) ** 2 + np.abs(a) ** (4.0 / 3.0) - 1.0


@dataclass
class FlrwBackground:
    t_grid: np.ndarray
    a: np.ndarray
    a_prime: np.ndarray
    t_crunch: float
    log_time: np.ndarray  # int_0^t a^{-1} ds at the nodes
    interpolation_order: int = 3
    rel_tol: float = 1e-12
    _spline: CubicHermiteSpline = field(init=False, repr=False)
    _log_spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        a_second = -(2.0 / 3.0) * np.cbrt(self.a)
        self._spline = CubicHermiteSpline(self.t_grid, np.stack([self.a, self.a_prime], axis=-1),
                                          np.stack([self.a_prime, a_second], axis=-1))
        self._log_spline = CubicHermiteSpline(self.t_grid, self.log_time, 1.0 / self.a)

    @property
    def t_max(self) -> float:
        return float(self.t_grid[-1])

    @property
    def a_min(self) -> float:
        return float(self.a[-1])

    def _check(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0) or np.any(t_arr > self.t_max):
            raise OutOfDomain(f"t outside tabulated range [0, {self.t_max!r}]")
        return t_arr

    def eval(self, t):
        """Return (a, a', H) at t, with H = a'/a."""
        t_arr = self._check(t)
        vals = self._spline(t_arr)
        a, ap = vals[..., 0], vals[..., 1]
        if t_arr.ndim == 0:
            a, ap = float(a), float(ap)
        return a, ap, ap / a

    def scale(self, t):
        return self.eval(t)[0]

    def log_time_at(self, t):
        """int_0^t a(s)^{-1} ds."""
        return self._log_spline(self._check(t))

    def time_of_scale(self, a_target: float) -> float:
        """Invert the monotone map t -> a(t) on the tabulated range."""
        if not self.a_min <= a_target <= 1.0:
            raise OutOfDomain(f"scale {a_target!r} outside [{self.a_min!r}, 1]")
        if a_target == 1.0:
            return 0.0
        return brentq(lambda s: self.scale(s) - a_target, 0.0, self.t_max, xtol=1e-15, rtol=1e-15)

    def first_integral_drift(self) -> float:
        return float(np.max(np.abs(first_integral_residual(self.a, self.a_prime))))

    def monotonicity_window(self) -> float:
        """Length tau of the final interval [T_C - tau, T_C) on which a' <= -6/7."""
        return self.t_crunch - self.time_of_scale(LATE_SCALE_THRESHOLD)


def _node_times(t_end: float, n_uniform: int, n_geometric: int, a_floor: float) -> np.ndarray:
    # near the crunch a ~ (t_end - t), so geometric spacing keeps dt/a bounded
    # distances are measured from the crunch (about t_end + a_floor), not from t_end,
    # so the last interval is also small compared with a
    uniform = np.linspace(0.0, t_end, n_uniform)
    t_c = t_end + a_floor
    tail = t_c - np.geomspace(0.5, 1.01 * a_floor, n_geometric)
    nodes = np.unique(np.concatenate([uniform, tail[(tail > 0.0) & (tail < t_end)], [t_end]]))
    return nodes


def solve_scale_factor(rel_tol: float = 1e-12, abs_tol: float = 1e-14, a_min: float = 1e-6,
                       n_uniform: int = 4001, n_geometric: int = 4000) -> FlrwBackground:
    """Integrate the Friedmann ODE from t = 0 until a reaches a_min."""
    if rel_tol <= 0 or abs_tol <= 0 or a_min <= 0:
        raise ValueError("tolerances and a_min must be positive")

    def hit_floor(t, y):
        return y[0] - a_min

    hit_floor.terminal = True
    hit_floor.direction = -1

    sol = solve_ivp(friedmann_rhs, (0.0, 10.0), [1.0, 0.0, 0.0], method="DOP853",
                    rtol=rel_tol, atol=abs_tol, events=hit_floor, dense_output=True)
    if sol.status != 1 or not sol.t_events[0].size:
        raise NonConvergence(f"scale factor never reached a_min={a_min!r}: {sol.message}")

    t_end = float(sol.t_events[0][0])
    t_nodes = _node_times(t_end, n_uniform, n_geometric, a_min)
    y = sol.sol(t_nodes)
    y[:, 0] = [1.0, 0.0, 0.0]
    y[:, -1] = sol.y_events[0][0]
    a, ap, log_t = y

    drift = float(np.max(np.abs(first_integral_residual(a, ap))))
    drift_tol = max(10.0 * rel_tol, 1e-14)
    if drift > 100.0 * drift_tol:
        raise InvariantViolation(f"first-integral drift {drift:.3e} exceeds 100x tolerance")

    # linear vanishing at the crunch: a ~ (T - t) with O(a^{7/3}) correction
    t_crunch = t_end + a[-1] / abs(ap[-1])
    return FlrwBackground(t_grid=t_nodes, a=a, a_prime=ap, t_crunch=t_crunch, log_time=log_t,
                          rel_tol=rel_tol)


def crunch_time_quadrature(rel_tol: float = 1e-12) -> float:
    """M = int_0^1 (1 - a^{4/3})^{-1/2} da.

    With a = (1 - s^2)^{3/4} this becomes (3/2) int_0^1 (1+s)^{-1/4} (1-s)^{-1/4} ds,
    whose endpoint factor is handled exactly by an algebraic quadrature weight.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    value, err = quad(lambda s: 1.5 * (1.0 + s) ** -0.25, 0.0, 1.0, weight="alg",
                      wvar=(0.0, -0.25), epsabs=0.0, epsrel=rel_tol, limit=200)
    if not np.isfinite(value) or err > max(rel_tol * abs(value), 1e-15) * 10:
        raise NonConvergence(f"crunch quadrature error estimate {err:.3e} too large")
    return float(value)


def crunch_integrand(a: float) -> float:
    return 1.0 / math.sqrt(1.0 - a ** (4.0 / 3.0))


def time_integral_power(bg: FlrwBackground, p: float, t1: float, t2: float,
                        rel_tol: float = 1e-10) -> float:
    """int_{t1}^{t2} a(s)^p ds by quadrature in the variable -ln(T_C - s)."""
    if not 0.0 <= t1 <= t2 <= bg.t_max:
        raise OutOfDomain("need 0 <= t1 <= t2 <= tabulated end")
    if t1 == t2:
        return 0.0
    T = bg.t_crunch
    s1, s2 = -math.log(T - t1), -math.log(T - t2)

    def integrand(s):
        t = min(T - math.exp(-s), bg.t_max)
        return bg.scale(t) ** p * math.exp(-s)

    value, _ = quad(integrand, s1, s2, epsabs=0.0, epsrel=rel_tol, limit=400)
    return float(value)


def regime_constant(bg: FlrwBackground, p: float) -> float:
    """Constant C_p making the three-regime bound hold on the tabulated range.

    Uses (T - t)/kappa <= a(t) <= T - t with kappa = max (T - t)/a; for p = -1
    the additive constant is sup_t (int_0^t a^{-1} + ln a).
    """
    kappa = float(np.max((bg.t_crunch - bg.t_grid) / bg.a))
    if p == -1.0:
        return float(np.max(bg.log_time + np.log(bg.a)))
    if p < -1.0 or p < 0.0:
        return kappa
    return kappa ** (p + 1.0)


def power_integral_bound(bg: FlrwBackground, p: float, t1: float, t2: float,
                         constant: float | None = None) -> float:
    """Right-hand side of the regime inequality for int_{t1}^{t2} a^p."""
    c = regime_constant(bg, p) if constant is None else constant
    a1, a2 = bg.scale(t1), bg.scale(t2)
    if p < -1.0:
        return c / abs(1.0 + p) * a2 ** (p + 1.0)
    if p == -1.0:
        return abs(math.log(a2)) + c
    return c / (1.0 + p) * a1 ** (p + 1.0)


def crunch_time_oracle() -> float:
    """3 sqrt(pi) Gamma(3/4) / Gamma(1/4)."""
    return 3.0 * math.sqrt(math.pi) * math.gamma(0.75) / math.gamma(0.25)
