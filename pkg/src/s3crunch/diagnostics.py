"""Energies, divergence identities, curvature blowup and crunch limits.

Everything consumes stored slices (RescaledState) plus the background; no
routine here advances the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import currents as C
from . import tensors as T
from .errors import InsufficientTail
from .evolution import deviation_from_flrw, rhs_rescaled
from .flrw import FlrwBackground
from .frame import FrameGeometry
from .state import SQRT23, RescaledState, constraint_residuals, spatial_geometry

LAMBDA_STAR = 0.1
RESIDUAL_FLOOR = 1e-14


# --- energies -------------------------------------------------------------------


@dataclass
class EnergyReport:
    order: int
    lambda_star: float
    t: float
    a: float
    E_metric: float
    E_sf: float
    E_total: float
    E_metric_norms: float
    E_sf_norms: float
    ham_l2: float
    mom_l2: float
    deviation: float

    @property
    def coercive_defect(self) -> float:
        """Relative gap between the current integrals and the separate L^2 norms."""
        alt = self.lambda_star * self.E_metric_norms + self.E_sf_norms
        return abs(self.E_total - alt) / max(abs(self.E_total), abs(alt), RESIDUAL_FLOOR)


def volume_density(state: RescaledState) -> np.ndarray:
    """sqrt(det G): the G volume form relative to the round one."""
    return np.sqrt(T.det(state.G))


def integrate_G(density, state: RescaledState, geom: FrameGeometry) -> float:
    return geom.integrate(np.asarray(density) * volume_density(state))


def _order_one_fields(state: RescaledState, geom: FrameGeometry, gam):
    LG = T.lie_derivative(state.G, "ll", geom.grad(state.G))
    LK = T.lie_derivative(state.Khat, "ul", geom.grad(state.Khat))
    LPhi = T.lie_derivative(state.Phi, "l", geom.grad(state.Phi))
    ZPsi = geom.grad(state.Psi)
    dLG = np.stack([T.covariant_derivative(LG[A], "ll", gam, geom.grad(LG[A])) for A in range(3)])
    return LG, LK, LPhi, ZPsi, dLG


def _orthonormal_sq(x, n_slots: int, L_inv):
    """Sum of squared components in a G-orthonormal frame (all slots lower or mixed handled by caller)."""
    idx = "pqr"[:n_slots]
    spec = ",".join(f"{c}{c.upper()}..." for c in idx) + f",{idx}...->{idx.upper()}..."
    y = np.einsum(spec, *([L_inv] * n_slots), x)
    return np.sum(y ** 2, axis=tuple(range(n_slots)))


def _frames(state: RescaledState):
    """L with G = L L^T, and E = L^{-T} whose columns are G-orthonormal vectors."""
    g = np.moveaxis(np.asarray(state.G, dtype=float), (0, 1), (-2, -1))
    L = np.linalg.cholesky(g)
    E = np.linalg.inv(np.swapaxes(L, -1, -2))
    return np.moveaxis(L, (-2, -1), (0, 1)), np.moveaxis(E, (-2, -1), (0, 1))


def energies(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry | None = None,
             order: int = 1, lambda_star: float = LAMBDA_STAR) -> EnergyReport:
    """Order-`order` energies (order <= 1); order 0 reports only constraint and deviation norms."""
    if order not in (0, 1):
        raise ValueError("energies are implemented for order 0 and 1")
    geom = geom if geom is not None else FrameGeometry()
    a = bg.scale(state.t)
    a43 = a ** (4.0 / 3.0)
    sg = spatial_geometry(state, geom)
    ham, mom = constraint_residuals(state, bg, geom, sg)
    ham_l2 = np.sqrt(integrate_G(ham ** 2, state, geom))
    mom_l2 = np.sqrt(integrate_G(T.norm_sq(mom, "l", state.G, state.G_inv), state, geom))
    em = esf = em2 = esf2 = 0.0
    if order == 1:
        G, Gi = state.G, state.G_inv
        _, LK, LPhi, ZPsi, dLG = _order_one_fields(state, geom, sg.gam)
        for A in range(3):
            em += integrate_G(C.metric_current_zero(LK[A], dLG[A], G, Gi, a), state, geom)
            esf += integrate_G(C.sf_current_zero(ZPsi[A], LPhi[A], G, Gi, a), state, geom)
        # second path: components in a G-orthonormal frame, one norm at a time
        L, E = _frames(state)
        for A in range(3):
            k_orth = np.einsum("ai...,ab...,bj...->ij...", L, LK[A], E)
            lk = integrate_G(np.sum(k_orth ** 2, axis=(0, 1)), state, geom)
            glg = integrate_G(_orthonormal_sq(dLG[A], 3, E), state, geom)
            zpsi = integrate_G(ZPsi[A] ** 2, state, geom)
            lphi = integrate_G(_orthonormal_sq(LPhi[A], 1, E), state, geom)
            em2 += lk + 0.25 * a43 * glg
            esf2 += zpsi + a43 * lphi
    return EnergyReport(order=order, lambda_star=lambda_star, t=state.t, a=a,
                        E_metric=em, E_sf=esf, E_total=lambda_star * em + esf,
                        E_metric_norms=em2, E_sf_norms=esf2,
                        ham_l2=float(ham_l2), mom_l2=float(mom_l2), deviation=deviation_from_flrw(state))


def volume_form_residual(states, bg: FlrwBackground) -> float:
    """max |d/dt log sqrt(det G) - a' a^{1/3} psi| over interior homogeneous slices (centred FD)."""
    if len(states) < 3:
        raise InsufficientTail("need at least three slices")
    t = np.array([s.t for s in states])
    logv = np.array([np.log(float(volume_density(s))) for s in states])
    worst = 0.0
    for i in range(1, len(states) - 1):
        w = _fd_weights(t[i - 1:i + 2], t[i])
        a, ap, _ = bg.eval(t[i])
        pred = ap * a ** (1.0 / 3.0) * float(states[i].psi)
        worst = max(worst, abs(w @ logv[i - 1:i + 2] - pred))
    return worst


# --- divergence identities ------------------------------------------------------


def _fd_weights(nodes, x0):
    """First-derivative weights at x0 from arbitrary nodes (local polynomial fit)."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    h = nodes - x0
    scale = np.max(np.abs(h))
    V = np.vander(h / scale, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / scale


@dataclass
class DivergenceReport:
    kind: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    terms: dict = field(default_factory=dict)
    floor_rel: float = 1e-2

    @property
    def floor(self) -> float:
        """Both sides pass through zero together at isolated times; the floor is set
        relative to the largest |lhs| + |rhs| of the run so those windows do not
        divide by (almost) zero."""
        peak = float(np.max(np.abs(self.lhs) + np.abs(self.rhs))) if len(self.lhs) else 0.0
        return max(RESIDUAL_FLOOR, self.floor_rel * peak)

    @property
    def residual(self) -> np.ndarray:
        """|lhs - rhs| / (|lhs| + |rhs| + floor) per window."""
        return np.abs(self.lhs - self.rhs) / (np.abs(self.lhs) + np.abs(self.rhs) + self.floor)

    @property
    def max_relative(self) -> float:
        return float(self.residual.max()) if len(self.times) else 0.0

    def mutated(self, name: str, factor: float = 1.1) -> "DivergenceReport":
        rhs = self.rhs + (factor - 1.0) * self.terms[name]
        return DivergenceReport(self.kind, self.times, self.lhs, rhs, self.terms, self.floor_rel)


def divergence_identity(states, bg: FlrwBackground, kind: str = "metric", fd_order: int = 2,
                        geom: FrameGeometry | None = None, stride: int = 1) -> DivergenceReport:
    """Compare d/dt J^0 + a' a^{1/3} psi J^0 (finite differences over the slices) with the
    sum of the named right-hand-side terms, summed over the three frame labels.

    kind = "metric" uses the order-one metric current; kind = "sf" the order-zero
    scalar-field current combined with the lapse equation.  Every `stride`-th
    window is evaluated.
    """
    if kind not in ("metric", "sf"):
        raise ValueError("kind must be 'metric' or 'sf'")
    if fd_order not in (2, 4):
        raise ValueError("fd_order must be 2 or 4")
    geom = geom if geom is not None else FrameGeometry()
    half = fd_order // 2
    if len(states) < fd_order + 1:
        raise InsufficientTail(f"need at least {fd_order + 1} slices")
    density = C.metric_current_density if kind == "metric" else C.sf_order0_density
    t = np.array([s.t for s in states])
    idx = range(half, len(states) - half, stride)
    need = sorted({j for i in idx for j in range(i - half, i + half + 1)})
    J = np.full(len(states), np.nan)
    J[need] = [density(states[j], bg) for j in need]
    lhs, rhs, terms = [], [], {}
    for i in idx:
        s = states[i]
        a, ap, _ = bg.eval(s.t)
        w = _fd_weights(t[i - half:i + half + 1], t[i])
        lhs.append(w @ J[i - half:i + half + 1] + ap * a ** (1.0 / 3.0) * float(s.psi) * J[i])
        rate, _ = rhs_rescaled(s, bg, geom, psi=s.psi)
        if kind == "metric":
            parts = {}
            for A in range(3):
                for name, v in C.metric_identity_terms(s, rate, bg, A, geom).items():
                    parts[name] = parts.get(name, 0.0) + float(v)
        else:
            parts = {k: float(v) for k, v in C.sf_identity_terms(s, rate, bg, geom).items()}
        for name, v in parts.items():
            terms.setdefault(name, []).append(v)
        rhs.append(sum(parts.values()))
    return DivergenceReport(kind, t[list(idx)], np.array(lhs), np.array(rhs),
                            {k: np.array(v) for k, v in terms.items()})


def mutation_ratios(report: DivergenceReport, names=C.METRIC_ERROR_TERMS, factor: float = 1.1,
                    zero_tol: float = 1e-300) -> dict:
    """max|mutated defect| / max|defect| for each term that is not identically zero."""
    base = np.abs(report.lhs - report.rhs).max()
    out = {}
    for name in names:
        contrib = report.terms.get(name)
        if contrib is None or np.abs(contrib).max() <= zero_tol:
            continue
        mut = report.mutated(name, factor)
        out[name] = float(np.abs(mut.lhs - mut.rhs).max() / max(base, 1e-300))
    return out


# --- curvature and crunch limits --------------------------------------------------


def curvature_invariant(state: RescaledState, bg: FlrwBackground):
    """(a^4 I, I) with I = (g4^{-1}(dphi, dphi))^2, the squared 4D Ricci contraction.

    In rescaled variables a^4 I = ((Psi + sqrt(2/3))^2 - a^{4/3} |Phi|_G^2)^2.
    """
    a = bg.scale(state.t)
    q = (state.Psi + SQRT23) ** 2 - a ** (4.0 / 3.0) * T.norm_sq(state.Phi, "l", state.G, state.G_inv)
    rescaled = np.asarray(q ** 2)
    return rescaled, rescaled / a ** 4


def blowup_exponent(states, bg: FlrwBackground, a_max: float = 1e-2) -> float:
    """Slope of log(max I) against log a over slices with a <= a_max."""
    a = np.array([bg.scale(s.t) for s in states])
    sel = a <= a_max
    if sel.sum() < 3:
        raise InsufficientTail("fewer than three slices with a <= a_max")
    inv = np.array([np.max(curvature_invariant(s, bg)[1]) for s in np.asarray(states, dtype=object)[sel]])
    return float(np.polyfit(np.log(a[sel]), np.log(inv), 1)[0])


@dataclass
class CrunchLimits:
    K_crunch: np.ndarray
    psi_crunch: np.ndarray
    limiting_residual: float
    decay_rate_K: float
    decay_rate_psi: float
    invariant_limit_gap: float
    n_tail: int

    @property
    def k_trace(self) -> float:
        return float(np.mean(T.trace(self.K_crunch)))


def _tail_fit(s, values, degree: int):
    """Least-squares fit values = c0 + c1 s + ... + c_degree s^degree; returns c0 (per component)."""
    V = np.vander(s, degree + 1, increasing=True)
    flat = values.reshape(len(s), -1)
    coef, *_ = np.linalg.lstsq(V, flat, rcond=None)
    return coef[0].reshape(values.shape[1:])


def _decay_rate(a, dist, window):
    lo, hi = window
    sel = (a >= lo) & (a <= hi) & (dist > 0.0)
    if sel.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(a[sel]), np.log(dist[sel]), 1)[0])


def avtd_limits(states, bg: FlrwBackground, a_fit: float = 1e-2, degree: int = 2,
                min_points: int = 6, rate_window: tuple | None = None) -> CrunchLimits:
    """Crunch limits of a k and a dt_phi by extrapolation in s = a^{4/3}.

    a k = K - (a'/3) I and a dt_phi = n (Psi + sqrt(2/3)); both approach their
    limits like a^{4/3} for near-FLRW data, so a polynomial in s fitted to the
    tail and evaluated at s = 0 gives the limits.  The decay rates are log-log
    slopes of the distance to the limits over `rate_window` in a (default: the
    two decades above the last slice).
    """
    t = np.array([s.t for s in states])
    a = np.array([bg.scale(x) for x in t])
    sel = a <= a_fit
    if sel.sum() < max(min_points, degree + 2):
        raise InsufficientTail(f"{int(sel.sum())} slices with a <= {a_fit}; need {max(min_points, degree + 2)}")
    ak, adphi = [], []
    for st, ti in zip(states, t):
        aa, ap, _ = bg.eval(ti)
        ak.append(st.Khat - (ap / 3.0) * T.identity_like(st.Khat))
        adphi.append((1.0 + aa ** (4.0 / 3.0) * st.psi) * (st.Psi + SQRT23))
    ak, adphi = np.array(ak), np.array(adphi)
    s = a[sel] ** (4.0 / 3.0)
    Kc = _tail_fit(s, ak[sel], degree)
    Pc = _tail_fit(s, adphi[sel], degree)
    lim = Pc ** 2 + np.einsum("ab...,ba...->...", Kc, Kc) - 1.0
    if rate_window is None:
        # the deepest decades of the tail; nearer a = 1 the pre-asymptotic terms dominate
        rate_window = (5.0 * a[sel].min(), 100.0 * a[sel].min())
    dK = np.array([np.abs(x - Kc).max() for x in ak])
    dP = np.array([np.abs(x - Pc).max() for x in adphi])
    rescaled_tail = np.array([np.max(curvature_invariant(st, bg)[0]) for st in np.asarray(states, dtype=object)[sel]])
    inv_limit = _tail_fit(s, rescaled_tail, degree)
    return CrunchLimits(K_crunch=Kc, psi_crunch=Pc, limiting_residual=float(np.abs(lim).max()),
                        decay_rate_K=_decay_rate(a, dK, rate_window),
                        decay_rate_psi=_decay_rate(a, dP, rate_window),
                        invariant_limit_gap=float(abs(inv_limit - np.max(Pc) ** 4)),
                        n_tail=int(sel.sum()))


# --- timelike geodesics -------------------------------------------------------------


@dataclass
class AffineBound:
    value: float
    exponent: float
    fitted_exponent: float
    marginal: bool


def geodesic_affine_bound(bg: FlrwBackground, c_eps: float = 0.0,
                          fit_window: tuple = (1e-5, 1e-3)) -> AffineBound:
    """int_0^{T_C} exp{(1/3 + c_eps) int_0^tau a^{-1}} dtau.

    The integrand grows like (T_C - tau)^{-(1/3 + c_eps)}; the bound is finite
    while that exponent stays above -1 and is flagged marginal once it reaches it.
    The stretch beyond the tabulated range is added in closed form from the
    power law matched at the last node.
    """
    q = 1.0 / 3.0 + c_eps
    T_c, t_end = bg.t_crunch, bg.t_max

    def f(tau):
        return float(np.exp(q * bg.log_time_at(tau)))

    nodes = bg.t_grid
    gap = T_c - nodes
    sel = (bg.a >= fit_window[0]) & (bg.a <= fit_window[1]) & (gap > 0.0)
    logs = q * bg.log_time[sel]
    fitted = float(np.polyfit(np.log(gap[sel]), logs, 1)[0])
    if q >= 1.0:
        return AffineBound(value=float("inf"), exponent=-q, fitted_exponent=fitted, marginal=True)
    body = 0.0
    # split at geometric breakpoints so quad sees a smooth integrand on each piece
    edges = np.concatenate([[0.0], T_c - np.geomspace(T_c, T_c - t_end, 40)[1:]])
    edges = np.unique(np.clip(edges, 0.0, t_end))
    for lo, hi in zip(edges[:-1], edges[1:]):
        body += quad(f, lo, hi, limit=200, epsabs=0.0, epsrel=1e-11)[0]
    rest = T_c - t_end
    amp = f(t_end) * rest ** q
    tail = amp * rest ** (1.0 - q) / (1.0 - q)
    return AffineBound(value=body + tail, exponent=-q, fitted_exponent=fitted, marginal=False)


# --- monotonicity monitor -------------------------------------------------------------


def good_term_density(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry | None = None) -> float:
    """Integrated sign-definite |a'|-weighted terms of the order-one identities.

    (1/3)|a'| a^{1/3} |nabla Lie G|^2 from the metric current and
    (4/3)|a'| a^{1/3} |Lie Phi|^2 + |a'| a^3 |nabla Z psi|^2 from the scalar field.
    """
    geom = geom if geom is not None else FrameGeometry()
    a, ap, _ = bg.eval(state.t)
    a13 = a ** (1.0 / 3.0)
    sg = spatial_geometry(state, geom)
    G, Gi = state.G, state.G_inv
    _, _, LPhi, _, dLG = _order_one_fields(state, geom, sg.gam)
    Zpsi = geom.grad(state.psi)
    total = 0.0
    for A in range(3):
        grad_zpsi = geom.grad(Zpsi[A])
        dens = ((1.0 / 3.0) * abs(ap) * a13 * T.norm_sq(dLG[A], "lll", G, Gi)
                + (4.0 / 3.0) * abs(ap) * a13 * T.norm_sq(LPhi[A], "l", G, Gi)
                + abs(ap) * a ** 3 * T.norm_sq(grad_zpsi, "l", G, Gi))
        total += integrate_G(dens, state, geom)
    return float(total)


@dataclass
class MonotonicityReport:
    exponent: float
    accumulated: np.ndarray
    positive: bool
    defined: bool
    sup_sqrt_energy: float


def energy_monotonicity_monitor(times, scales, energy, good=None, a_cut: float = 0.5) -> MonotonicityReport:
    """Envelope exponent c with E^{1/2}(t) <= E^{1/2}(0) a(t)^{-c} for a <= a_cut.

    `good` is the per-slice good-term integral; its running time integral must be
    non-negative and non-decreasing.
    """
    times = np.asarray(times, dtype=float)
    a = np.asarray(scales, dtype=float)
    E = np.asarray(energy, dtype=float)
    root = np.sqrt(np.maximum(E, 0.0))
    if good is None:
        good = np.zeros_like(times)
    good = np.asarray(good, dtype=float)
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (good[1:] + good[:-1]) * np.diff(times))])
    positive = bool(np.all(good >= 0.0) and np.all(np.diff(acc) >= 0.0))
    sel = a <= a_cut
    if root[0] <= 0.0 or not sel.any():
        return MonotonicityReport(float("nan"), acc, positive, False, float(root.max(initial=0.0)))
    c = np.log(root[sel] / root[0]) / np.log(1.0 / a[sel])
    return MonotonicityReport(float(max(0.0, c.max())), acc, positive, True, float(root.max()))


def divergence_identity_residual(window, bg: FlrwBackground, geom: FrameGeometry | None = None,
                                 which: str = "metric") -> float:
    """Relative residual |lhs - rhs| / (|lhs| + |rhs| + floor) on one window of three slices."""
    if len(window) != 3:
        raise ValueError("window must hold exactly three slices")
    rep = divergence_identity(window, bg, kind=which, geom=geom)
    rep.floor_rel = 0.0
    return float(rep.residual[0])
