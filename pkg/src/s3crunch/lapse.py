"""Elliptic lapse equations in rescaled variables.

HIGH form:  a^{8/3} Lap psi - a^{4/3} f psi       = 2 sqrt(2/3) Psi + |K|^2 + Psi^2
LOW form:   a^{4/3} Lap psi - f_tilde psi         = (R - 2/3) - |Phi|^2
with
    f       = a'^2 + (2/3) a^{4/3} + |K|^2 + 2 sqrt(2/3) Psi + Psi^2
    f_tilde = a'^2 + (2/3) a^{4/3} + a^{4/3} (R - 2/3) - a^{4/3} |Phi|^2.
The two forms differ by (1 + a^{4/3} psi) times the Hamiltonian residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import tensors as T
from .errors import DegenerateCoefficient, NonConvergence
from .flrw import FlrwBackground
from .frame import FrameGeometry, fd_weights
from .state import SQRT23, RescaledState, SpatialGeometry, spatial_geometry

F_FLOOR = 1e-8


@dataclass
class LapseProblem:
    f: np.ndarray
    f_tilde: np.ndarray | None
    rhs_high: np.ndarray
    rhs_low: np.ndarray | None
    a: float
    a_prime: float


@dataclass
class LapseStats:
    iterations: int = 0
    residual: float = 0.0
    min_f: float = float("nan")


def lapse_problem(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry | None = None,
                  sg: SpatialGeometry | None = None, with_low: bool = False) -> LapseProblem:
    a, ap, _ = bg.eval(state.t)
    a43 = a ** (4.0 / 3.0)
    k2 = T.norm_sq(state.Khat, "ul", state.G, state.G_inv)
    source = 2.0 * SQRT23 * state.Psi + state.Psi ** 2
    f = ap ** 2 + (2.0 / 3.0) * a43 + k2 + source
    rhs_high = source + k2
    f_tilde = rhs_low = None
    if with_low:
        if sg is None:
            sg = spatial_geometry(state, geom if geom is not None else FrameGeometry())
        phi2 = T.norm_sq(state.Phi, "l", state.G, state.G_inv)
        curv = sg.scalar - 2.0 / 3.0
        f_tilde = ap ** 2 + (2.0 / 3.0) * a43 + a43 * curv - a43 * phi2
        rhs_low = curv - phi2
    return LapseProblem(f=np.asarray(f, dtype=float), f_tilde=f_tilde, rhs_high=np.asarray(rhs_high, dtype=float),
                        rhs_low=rhs_low, a=a, a_prime=ap)


def _check_coefficient(c, name: str, floor: float):
    if np.min(c) <= floor:
        raise DegenerateCoefficient(f"{name} fell to {np.min(c):.3e} (floor {floor})")


def solve_lapse_homogeneous(state: RescaledState, bg: FlrwBackground, f_floor: float = F_FLOOR):
    """Spatially constant lapse: psi = -rhs / (a^{4/3} f)."""
    prob = lapse_problem(state, bg)
    _check_coefficient(prob.f, "f", f_floor)
    return -prob.rhs_high / (prob.a ** (4.0 / 3.0) * prob.f)


def laplacian_operator(state: RescaledState, geom: FrameGeometry, gam=None):
    """psi -> Lap_G psi on the grid, using the frame Hessian."""
    if gam is None:
        gam = T.connection(state.G, geom.grad(state.G), state.G_inv)
    Ginv = state.G_inv
    w = np.einsum("ab...,adb...->d...", Ginv, gam)
    if geom.homogeneous:
        return lambda psi: np.zeros_like(psi)
    grid = geom.grid
    # G^{ab} Z_a (Z_b psi) = sum_{i,b} E^{ib} d_i (Z_b psi) with E^{ib} = G^{ab} c_a^i
    E = np.einsum("ab...,ai...->ib...", Ginv, grid.coef)

    def apply(psi):
        d = grid.grad(psi)
        out = -np.einsum("d...,d...->...", w, d)
        for b in range(3):
            p = grid.partials(d[b])
            out += E[0, b] * p[0] + E[1, b] * p[1] + E[2, b] * p[2]
        return out

    return apply


class RoundPreconditioner:
    """Approximate inverse of  c - s Lap_round  for the composed centered stencils.

    With constant c the round operator separates: Fourier modes in xi1, xi2
    decouple (the pole continuation only multiplies ghost rows by (-1)^m), leaving
    one small dense eta-block per mode pair, inverted once up front.
    """

    def __init__(self, grid, scale_lap: float, coeff: float):
        offsets, w = fd_weights(grid.fd_order)
        n, n1, n2 = grid.shape
        self.grid = grid
        m1 = np.arange(n1 // 2 + 1)
        m2 = np.arange(n2 // 2 + 1)
        sig1 = sum(2.0 * wk * np.sin(k * m1 * grid.d_xi1) for k, wk in zip(offsets, w) if k > 0) / grid.d_xi1
        sig2 = sum(2.0 * wk * np.sin(k * m2 * grid.d_xi2) for k, wk in zip(offsets, w) if k > 0) / grid.d_xi2
        eta = grid.eta
        blocks = np.empty((m1.size, m2.size, n, n))
        d_cache = {}
        for i, a in enumerate(m1):
            for j, b in enumerate(m2):
                key = (a % 2, b % 2)
                if key not in d_cache:
                    d_cache[key] = self._eta_matrix(n, offsets, w, grid.d_eta,
                                                    (-1.0) ** b, (-1.0) ** a)
                D = d_cache[key]
                lap = (D @ D + np.diag((1.0 / np.tan(eta) - np.tan(eta))) @ D
                       - np.diag(sig1[i] ** 2 / np.cos(eta) ** 2 + sig2[j] ** 2 / np.sin(eta) ** 2)) / 9.0
                blocks[i, j] = coeff * np.eye(n) - scale_lap * lap
        inv = np.linalg.inv(blocks)
        idx1 = np.minimum(np.arange(n1), n1 - np.arange(n1))
        idx2 = np.minimum(np.arange(n2), n2 - np.arange(n2))
        self.inv = np.ascontiguousarray(inv[idx1[:, None], idx2[None, :]])

    @staticmethod
    def _eta_matrix(n, offsets, w, h, sign_low, sign_high):
        D = np.zeros((n, n))
        for i in range(n):
            for k, wk in zip(offsets, w):
                if wk == 0.0:
                    continue
                j = i + k
                if j < 0:
                    D[i, -1 - j] += sign_low * wk
                elif j >= n:
                    D[i, 2 * n - 1 - j] += sign_high * wk
                else:
                    D[i, j] += wk
        return D / h

    def __call__(self, r: np.ndarray) -> np.ndarray:
        g = self.grid
        rh = np.fft.rfft2(r.reshape(g.shape), axes=(1, 2))
        k2 = rh.shape[2]
        blk = self.inv[:, :k2]
        out = np.einsum("ijab,bij->aij", blk, rh)
        return np.fft.irfft2(out, s=g.shape[1:], axes=(1, 2)).ravel()


def solve_elliptic(state: RescaledState, geom: FrameGeometry, scale_lap: float, coeff: np.ndarray,
                   rhs: np.ndarray, solver_tol: float = 1e-10, maxiter: int = 2000, x0=None,
                   gam=None, stats: LapseStats | None = None) -> np.ndarray:
    """Solve scale_lap * Lap psi - coeff * psi = rhs on the grid (preconditioned GMRES)."""
    shape = geom.grid.shape
    n = int(np.prod(shape))
    lap = laplacian_operator(state, geom, gam)
    coeff = np.broadcast_to(coeff, shape)

    def matvec(v):
        p = v.reshape(shape)
        return (coeff * p - scale_lap * lap(p)).ravel()

    pre = RoundPreconditioner(geom.grid, scale_lap, float(np.mean(coeff)))
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=pre, dtype=float)
    b = -np.asarray(rhs, dtype=float).ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        if stats is not None:
            stats.iterations, stats.residual = 0, 0.0
        return np.zeros(shape)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = gmres(A, b, x0=None if x0 is None else np.ravel(x0), rtol=solver_tol, atol=0.0,
                    restart=60, maxiter=maxiter, M=M, callback=cb, callback_type="pr_norm")
    res = np.linalg.norm(matvec(x) - b) / bnorm
    if stats is not None:
        stats.iterations, stats.residual = count[0], float(res)
    if info != 0 and res > 10 * solver_tol:
        raise NonConvergence(f"lapse solve stopped with relative residual {res:.3e}")
    return x.reshape(shape)


def solve_lapse_elliptic(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry,
                         which: str = "HIGH", solver_tol: float = 1e-10, f_floor: float = F_FLOOR,
                         x0=None, sg: SpatialGeometry | None = None,
                         stats: LapseStats | None = None) -> np.ndarray:
    which = which.upper()
    if which not in ("HIGH", "LOW"):
        raise ValueError("which must be HIGH or LOW")
    prob = lapse_problem(state, bg, geom, sg=sg, with_low=(which == "LOW"))
    a43 = prob.a ** (4.0 / 3.0)
    gam = sg.gam if sg is not None else None
    if which == "HIGH":
        _check_coefficient(prob.f, "f", f_floor)
        if stats is not None:
            stats.min_f = float(np.min(prob.f))
        return solve_elliptic(state, geom, a43 ** 2, a43 * prob.f, prob.rhs_high, solver_tol,
                              x0=x0, gam=gam, stats=stats)
    _check_coefficient(prob.f_tilde, "f_tilde", f_floor)
    if stats is not None:
        stats.min_f = float(np.min(prob.f_tilde))
    return solve_elliptic(state, geom, a43, prob.f_tilde, prob.rhs_low, solver_tol,
                          x0=x0, gam=gam, stats=stats)


def solve_lapse(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry, **kw) -> np.ndarray:
    if geom.homogeneous:
        return np.asarray(solve_lapse_homogeneous(state, bg, kw.get("f_floor", F_FLOOR)))
    return solve_lapse_elliptic(state, bg, geom, **kw)


@dataclass
class MaxPrincipleReport:
    sup_psi: float
    sup_rhs: float
    constant: float
    bound: float
    passed: bool


def maximum_principle_check(psi, rhs, coeff, margin: float = 1e-6) -> MaxPrincipleReport:
    """sup|psi| <= sup|rhs| / min(coeff) for  s Lap psi - coeff psi = rhs  with coeff > 0."""
    sup_psi = float(np.max(np.abs(psi)))
    sup_rhs = float(np.max(np.abs(rhs)))
    cmin = float(np.min(coeff))
    const = 1.0 / cmin if cmin > 0 else float("inf")
    bound = const * sup_rhs
    return MaxPrincipleReport(sup_psi, sup_rhs, const, bound,
                              bool(sup_psi <= bound * (1.0 + margin) + 1e-300))
