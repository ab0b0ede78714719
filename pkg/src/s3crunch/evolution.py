"""Rescaled evolution equations and RK4 time stepping toward the crunch."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensors as T
from .errors import ConfigError, DegenerateScale, InvariantViolation
from .flrw import FlrwBackground
from .frame import FrameGeometry
from .lapse import LapseStats, solve_lapse
from .state import (SQRT23, RescaledState, constraint_residuals, flrw_state, norm_G, psi_root,
                    hamiltonian_data, spatial_geometry)


@dataclass
class StateRate:
    """Time derivatives of the evolved fields."""

    G: np.ndarray
    G_inv: np.ndarray
    Khat: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray


@dataclass
class PerturbationSpec:
    amplitude: float = 0.0
    g_shape: tuple = (1.0, -1.0, 0.0)
    k_shape: tuple = (1.0, -1.0, 0.0)
    grid_amplitude: float = 0.0

    def __post_init__(self):
        if len(self.g_shape) != 3 or len(self.k_shape) != 3:
            raise ConfigError("g_shape and k_shape need three entries")
        if abs(sum(self.k_shape)) > 1e-14:
            raise ConfigError("k_shape must be trace free")


@dataclass
class EvolutionConfig:
    mode: str = "homogeneous"
    dt_scale: float = 0.01
    cfl: float = 0.5
    dt_fixed: float | None = None
    a_stop: float = 1e-3
    t_stop: float | None = None
    solver_tol: float = 1e-10
    inverse_drift_tol: float = 1e-10
    constraint_ceiling: float = 1e-2
    dissipation: float = 0.0
    record_every: int = 1
    keep_states: bool = True
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self):
        if self.mode not in ("homogeneous", "grid"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.dissipation < 0.0:
            raise ConfigError("dissipation must be non-negative")
        if self.dt_scale <= 0.0 or self.a_stop <= 0.0:
            raise ConfigError("dt_scale and a_stop must be positive")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    final: RescaledState | None = None
    stop_reason: str = ""


def _vec_outer(state: RescaledState):
    """(Phi^sharp (x) Phi)^i_j."""
    up = np.einsum("ia...,a...->i...", state.G_inv, state.Phi)
    return np.einsum("i...,j...->ij...", up, state.Phi)


def rhs_rescaled(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry,
                 psi: np.ndarray | None = None, sg=None, stats: LapseStats | None = None,
                 solver_tol: float = 1e-10, x0=None,
                 dissipation: float = 0.0) -> tuple[StateRate, np.ndarray]:
    """Time derivatives of (G, G^{-1}, K, Psi, Phi) and the lapse used.

    dissipation > 0 adds the grid's Kreiss-Oliger term to every evolved field.
    """
    a, ap, _ = bg.eval(state.t)
    if a <= bg.a_min:
        raise DegenerateScale(f"a(t)={a!r} at or below a_min")
    a13, a43, a53 = a ** (1.0 / 3.0), a ** (4.0 / 3.0), a ** (5.0 / 3.0)
    if sg is None:
        sg = spatial_geometry(state, geom)
    if psi is None:
        kw = {} if geom.homogeneous else {"solver_tol": solver_tol, "sg": sg, "stats": stats, "x0": x0}
        psi = solve_lapse(state, bg, geom, **kw)
    G, Gi, K = state.G, state.G_inv, state.Khat
    eye = T.identity_like(G)
    lapse_fac = 1.0 + a43 * psi

    GK = T.sym(T.mm(G, K))
    KGi = T.sym(T.mm(K, Gi))
    dG = -2.0 * (1.0 / a + a13 * psi) * GK + (2.0 / 3.0) * a13 * ap * psi * G
    dGi = 2.0 * (1.0 / a + a13 * psi) * KGi - (2.0 / 3.0) * a13 * ap * psi * Gi

    dpsi = geom.grad(psi)
    ddpsi = geom.grad(dpsi)
    hess_sharp = T.mm(Gi, T.hessian(psi, dpsi, ddpsi, sg.gam))
    outer = _vec_outer(state)
    dK = (-a53 * hess_sharp + a13 * lapse_fac * (sg.ric_sharp - (2.0 / 9.0) * eye)
          + ((1.0 / 3.0) * ap ** 2 * a13 + (2.0 / 9.0) * a53) * psi * eye
          - a13 * ap * psi * K - a13 * outer - a53 * psi * outer)

    dPhi_sp = geom.grad(state.Phi)
    div_phi = np.einsum("ab...,ab...->...", Gi, T.covariant_derivative(state.Phi, "l", sg.gam, dPhi_sp))
    grad_psi_phi = np.einsum("ab...,a...,b...->...", Gi, dpsi, state.Phi)
    dPsi = (lapse_fac * a13 * div_phi - SQRT23 * ap * a13 * psi - a13 * ap * psi * state.Psi
            + a53 * grad_psi_phi)
    dPhi = (lapse_fac / a) * geom.grad(state.Psi) + (SQRT23 + state.Psi) * a13 * dpsi
    rate = StateRate(G=dG, G_inv=dGi, Khat=dK, Psi=dPsi, Phi=dPhi)
    if dissipation > 0.0 and not geom.homogeneous:
        grid = geom.grid
        rate = StateRate(G=dG + grid.dissipation(G, dissipation),
                         G_inv=dGi + grid.dissipation(Gi, dissipation),
                         Khat=dK + grid.dissipation(K, dissipation),
                         Psi=dPsi + grid.dissipation(state.Psi, dissipation),
                         Phi=dPhi + grid.dissipation(state.Phi, dissipation))
    return rate, psi


def _advance(state: RescaledState, rate: StateRate, h: float, t: float) -> RescaledState:
    return RescaledState(t=t, G=state.G + h * rate.G, G_inv=state.G_inv + h * rate.G_inv,
                         Khat=state.Khat + h * rate.Khat, psi=state.psi,
                         Psi=state.Psi + h * rate.Psi, Phi=state.Phi + h * rate.Phi)


def _combine(k1, k2, k3, k4) -> StateRate:
    def c(name):
        return (getattr(k1, name) + 2.0 * getattr(k2, name) + 2.0 * getattr(k3, name)
                + getattr(k4, name)) / 6.0
    return StateRate(G=c("G"), G_inv=c("G_inv"), Khat=c("Khat"), Psi=c("Psi"), Phi=c("Phi"))


def project(state: RescaledState, inverse_drift_tol: float = 1e-10) -> RescaledState:
    """Symmetrize the metrics, remove the trace of K, re-invert G if G G^{-1} drifted."""
    G = T.sym(state.G)
    Gi = T.sym(state.G_inv)
    K = state.Khat - (T.trace(state.Khat) / 3.0) * T.identity_like(state.Khat)
    if np.abs(T.mm(G, Gi) - T.identity_like(G)).max() > inverse_drift_tol:
        Gi = T.sym(T.inverse(G))
    return state.with_(G=G, G_inv=Gi, Khat=K)


def step(state: RescaledState, dt: float, bg: FlrwBackground, geom: FrameGeometry,
         solver_tol: float = 1e-10, inverse_drift_tol: float = 1e-10,
         stats: LapseStats | None = None, dissipation: float = 0.0) -> RescaledState:
    """One classical RK4 step; the lapse is re-solved at every stage.

    state.psi is taken to be the lapse of `state`; the returned state carries the
    lapse solved at the new time.  dt may be negative.
    """
    t0 = state.t
    kw = dict(solver_tol=solver_tol, stats=stats, dissipation=dissipation)
    k1, _ = rhs_rescaled(state, bg, geom, psi=state.psi, **kw)
    s2 = _advance(state, k1, 0.5 * dt, t0 + 0.5 * dt)
    k2, p2 = rhs_rescaled(s2, bg, geom, x0=state.psi, **kw)
    s3 = _advance(state, k2, 0.5 * dt, t0 + 0.5 * dt)
    k3, p3 = rhs_rescaled(s3, bg, geom, x0=p2, **kw)
    s4 = _advance(state, k3, dt, t0 + dt)
    k4, p4 = rhs_rescaled(s4, bg, geom, x0=p3, **kw)
    new = project(_advance(state, _combine(k1, k2, k3, k4), dt, t0 + dt), inverse_drift_tol)
    psi_new = lapse_for(new, bg, geom, solver_tol, x0=p4, stats=stats)
    return new.with_(psi=psi_new)


def lapse_for(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry,
              solver_tol: float = 1e-10, x0=None, stats: LapseStats | None = None) -> np.ndarray:
    if geom.homogeneous:
        return np.asarray(solve_lapse(state, bg, geom))
    return solve_lapse(state, bg, geom, solver_tol=solver_tol, x0=x0, stats=stats)


def low_mode(y: np.ndarray) -> np.ndarray:
    """Smooth, pole-regular scalar used to seed spatially varying perturbations."""
    return (y[..., 0] * y[..., 2] + 0.5 * y[..., 1] * y[..., 3] - 0.25 * y[..., 0] * y[..., 1]) / 9.0


GRID_TENSOR = np.array([[1.0, 0.3, 0.0], [0.3, -0.5, 0.2], [0.0, 0.2, -0.5]])


def make_initial_data(spec: PerturbationSpec, bg: FlrwBackground, geom: FrameGeometry,
                      t0: float = 0.0, solver_tol: float = 1e-12) -> RescaledState:
    """Constraint-satisfying data: diagonal homogeneous part, optional low-mode metric bump.

    Psi comes from the pointwise Hamiltonian constraint and psi from the lapse
    equation.  With Phi = 0 the momentum constraint is div K = 0, which holds
    exactly when either the homogeneous K part or the grid metric bump is zero;
    with both switched on a residual of order amplitude * grid_amplitude remains.
    """
    shape = () if geom.homogeneous else geom.grid.shape
    base = flrw_state(t0, shape)
    eps = spec.amplitude
    G = base.G + eps * np.diag(spec.g_shape).reshape((3, 3) + (1,) * len(shape))
    K = base.Khat + eps * np.diag(spec.k_shape).reshape((3, 3) + (1,) * len(shape))
    if spec.grid_amplitude and not geom.homogeneous:
        w = geom.grid.sample(low_mode)
        G = G + spec.grid_amplitude * GRID_TENSOR.reshape(3, 3, 1, 1, 1) * w
    state = base.with_(G=G, G_inv=T.inverse(G), Khat=K)
    a = bg.scale(t0)
    sg = spatial_geometry(state, geom)
    Psi = psi_root(hamiltonian_data(state.G, state.G_inv, state.Khat, state.Phi, sg.scalar, a))
    state = state.with_(Psi=np.asarray(Psi, dtype=float))
    return state.with_(psi=lapse_for(state, bg, geom, solver_tol))


def deviation_from_flrw(state: RescaledState) -> float:
    eye = T.identity_like(state.G)
    parts = [state.G - eye, state.G_inv - eye, state.Khat, state.psi, state.Psi, state.Phi]
    return float(max(np.abs(p).max() for p in parts))


def step_size(config: EvolutionConfig, a: float, geom: FrameGeometry) -> float:
    if config.dt_fixed is not None:
        return config.dt_fixed
    if geom.homogeneous:
        return config.dt_scale * a
    return config.cfl * a * geom.grid.h_min


def diagnostics_row(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry, dt: float,
                    stats: LapseStats | None = None) -> dict:
    a, _, _ = bg.eval(state.t)
    ham, mom = constraint_residuals(state, bg, geom)
    row = {
        "t": state.t, "a": a, "dt": dt,
        "ham_res": float(np.abs(ham).max()),
        "mom_res": float(norm_G(mom, "l", state).max()),
        "psi": float(np.abs(state.psi).max()),
        "K_norm": float(norm_G(state.Khat, "ul", state).max()),
        "Psi": float(np.abs(state.Psi).max()),
        "det_G": float(np.max(T.det(state.G))),
        "inverse_drift": state.inverse_drift(),
    }
    if stats is not None:
        row.update(lapse_iterations=stats.iterations, lapse_residual=stats.residual, min_f=stats.min_f)
    return row


def evolve(config: EvolutionConfig, bg: FlrwBackground, geom: FrameGeometry,
           initial: RescaledState, row_hook=None) -> Trajectory:
    """Advance until a(t) <= a_stop (or t_stop), recording a diagnostics row per step."""
    if config.a_stop < bg.a_min:
        raise ConfigError("a_stop must be >= the background a_min")
    t_end = bg.time_of_scale(config.a_stop)
    if config.t_stop is not None:
        t_end = min(t_end, config.t_stop)
    traj = Trajectory()
    state = initial
    stats = LapseStats()
    k = 0
    while True:
        a = bg.scale(state.t)
        if k % config.record_every == 0 or state.t >= t_end:
            row = diagnostics_row(state, bg, geom, step_size(config, a, geom), stats)
            if row_hook is not None:
                row.update(row_hook(state))
            traj.rows.append(row)
            traj.times.append(state.t)
            if config.keep_states:
                traj.states.append(state)
            if row["ham_res"] > config.constraint_ceiling:
                traj.final, traj.stop_reason = state, "constraint ceiling"
                raise InvariantViolation(f"Hamiltonian residual {row['ham_res']:.3e} above ceiling")
        if state.t >= t_end:
            break
        dt = min(step_size(config, a, geom), t_end - state.t)
        if t_end - (state.t + dt) < 1e-12 * max(1.0, t_end):
            dt = t_end - state.t
        new = step(state, dt, bg, geom, config.solver_tol, config.inverse_drift_tol, stats,
                   config.dissipation)
        if new.t >= t_end - 1e-14:
            new = new.with_(t=t_end)
        if np.min(T.min_eigenvalue(new.G)) <= 0.0:
            traj.final, traj.stop_reason = state, "metric lost positivity"
            raise InvariantViolation("rescaled metric is no longer positive definite")
        state = new
        k += 1
    traj.final, traj.stop_reason = state, "a_stop reached"
    return traj
