"""Time-rescaled solution variables, physical variables, norms and constraints.

Rescaled variables at time t with scale factor a:
    G = a^{-2/3} g,  K = a (k + (H/3) I),  psi = a^{-4/3} (n - 1),
    Psi = a dt_phi / n - sqrt(2/3),  Phi = grad phi.
Frame-component arrays use the layout documented in tensors.py.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensors as T
from .errors import ConstraintInfeasible, DegenerateScale
from .flrw import FlrwBackground
from .frame import FrameGeometry

SQRT23 = np.sqrt(2.0 / 3.0)


@dataclass(frozen=True)
class RescaledState:
    t: float
    G: np.ndarray
    G_inv: np.ndarray
    Khat: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray

    @property
    def spatial_shape(self) -> tuple:
        return np.shape(self.psi)

    @property
    def homogeneous(self) -> bool:
        return self.spatial_shape == ()

    def with_(self, **kw) -> "RescaledState":
        return replace(self, **kw)

    def inverse_drift(self) -> float:
        return float(np.abs(T.mm(self.G, self.G_inv) - T.identity_like(self.G)).max())

    def trace_defect(self) -> float:
        return float(np.abs(T.trace(self.Khat)).max())


@dataclass(frozen=True)
class PhysicalState:
    t: float
    g: np.ndarray
    g_inv: np.ndarray
    k: np.ndarray  # mixed (1,1)
    n: np.ndarray
    dt_phi: np.ndarray
    grad_phi: np.ndarray


def flrw_state(t: float = 0.0, spatial_shape: tuple = ()) -> RescaledState:
    z = np.zeros(spatial_shape)
    eye = T.round_metric(spatial_shape)
    return RescaledState(t=t, G=eye, G_inv=eye.copy(), Khat=np.zeros((3, 3) + spatial_shape),
                         psi=z.copy(), Psi=z.copy(), Phi=np.zeros((3,) + spatial_shape))


def _scale(bg: FlrwBackground, t: float):
    a, ap, H = bg.eval(t)
    if a <= bg.a_min:
        raise DegenerateScale(f"a(t)={a!r} at or below a_min")
    return a, ap, H


def rescale(phys: PhysicalState, bg: FlrwBackground) -> RescaledState:
    a, _, H = _scale(bg, phys.t)
    eye = T.identity_like(phys.k)
    n = np.asarray(phys.n, dtype=float)
    return RescaledState(
        t=phys.t,
        G=a ** (-2.0 / 3.0) * phys.g,
        G_inv=a ** (2.0 / 3.0) * phys.g_inv,
        Khat=a * (phys.k + (H / 3.0) * eye),
        psi=a ** (-4.0 / 3.0) * (n - 1.0),
        Psi=a * phys.dt_phi / n - SQRT23,
        Phi=np.array(phys.grad_phi, dtype=float),
    )


def unrescale(state: RescaledState, bg: FlrwBackground) -> PhysicalState:
    a, _, H = _scale(bg, state.t)
    eye = T.identity_like(state.Khat)
    n = 1.0 + a ** (4.0 / 3.0) * state.psi
    return PhysicalState(
        t=state.t,
        g=a ** (2.0 / 3.0) * state.G,
        g_inv=a ** (-2.0 / 3.0) * state.G_inv,
        k=state.Khat / a - (H / 3.0) * eye,
        n=n,
        dt_phi=n * (state.Psi + SQRT23) / a,
        grad_phi=np.array(state.Phi, dtype=float),
    )


def cmc_defect(phys: PhysicalState, bg: FlrwBackground) -> float:
    """max |tr k + H| scaled by max(1, |H|)."""
    _, _, H = bg.eval(phys.t)
    return float(np.abs(T.trace(phys.k) + H).max() / max(1.0, abs(H)))


def norm_G(xi: np.ndarray, valence: str, state: RescaledState) -> np.ndarray:
    """Pointwise |xi|_G."""
    return T.norm(xi, valence, state.G, state.G_inv)


@dataclass
class SpatialGeometry:
    """Spatial derivatives and curvature of the rescaled metric on one slice."""

    dG: np.ndarray
    ddG: np.ndarray
    gam: np.ndarray
    ric_sharp: np.ndarray
    scalar: np.ndarray


def spatial_geometry(state: RescaledState, geom: FrameGeometry) -> SpatialGeometry:
    dG = geom.grad(state.G)
    low = T.connection_lower(state.G, dG)
    gam = np.einsum("dc...,acb...->adb...", state.G_inv, low)
    if geom.homogeneous:
        ddG = np.zeros((3,) + dG.shape)
        ric_sharp, R = T.ricci_sharp(state.G, dG, None, state.G_inv, low=low)
    else:
        ddG = geom.grad(dG)
        ric_sharp, R = T.ricci_sharp(state.G, dG, ddG, state.G_inv, low=low)
    return SpatialGeometry(dG=dG, ddG=ddG, gam=gam, ric_sharp=ric_sharp, scalar=R)


def hamiltonian_data(G, G_inv, Khat, Phi, R, a):
    """C = a^{4/3}(R - 2/3) - |K|^2 - a^{4/3} |Phi|^2."""
    a43 = a ** (4.0 / 3.0)
    return (a43 * (R - 2.0 / 3.0) - T.norm_sq(Khat, "ul", G, G_inv)
            - a43 * T.norm_sq(Phi, "l", G, G_inv))


def constraint_residuals(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry,
                         sg: SpatialGeometry | None = None):
    """(Hamiltonian residual, momentum residual) fields."""
    a = bg.scale(state.t)
    if sg is None:
        sg = spatial_geometry(state, geom)
    C = hamiltonian_data(state.G, state.G_inv, state.Khat, state.Phi, sg.scalar, a)
    ham = C - 2.0 * SQRT23 * state.Psi - state.Psi ** 2
    div_k = T.divergence_ul(state.Khat, geom.grad(state.Khat), sg.gam)
    mom = div_k + SQRT23 * state.Phi + state.Psi * state.Phi
    return ham, mom


def psi_root(C):
    """Root of Psi^2 + 2 sqrt(2/3) Psi = C that vanishes at C = 0."""
    disc = 2.0 / 3.0 + np.asarray(C, dtype=float)
    if np.any(disc < 0.0):
        raise ConstraintInfeasible(f"Hamiltonian discriminant negative (min {disc.min():.3e})")
    # C / (sqrt(2/3) + sqrt(disc)) avoids cancellation for small C
    return C / (SQRT23 + np.sqrt(disc))


def solve_hamiltonian_for_Psi(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry):
    a = bg.scale(state.t)
    sg = spatial_geometry(state, geom)
    return psi_root(hamiltonian_data(state.G, state.G_inv, state.Khat, state.Phi, sg.scalar, a))


def lie_strings(xi: np.ndarray, valence: str, order: int, geom: FrameGeometry) -> np.ndarray:
    """All order-`order` strings Lie_{Z_A1} ... Lie_{Z_Ak} xi.

    Result axes: tensor slots, then the k frame labels (outermost first), then space.
    """
    out = np.asarray(xi, dtype=float)
    nslots = len(valence)
    for _ in range(order):
        d = geom.grad(out)
        if nslots == 0:
            out = d
        else:
            out = np.moveaxis(T.lie_derivative(out, valence, d), 0, nslots)
    return out


def _round_sq(x: np.ndarray, n_axes: int) -> np.ndarray:
    """Squared round-metric norm: the frame is orthonormal, so sum component squares."""
    x = np.asarray(x, dtype=float)
    return np.sum(x ** 2, axis=tuple(range(n_axes))) if n_axes else x ** 2


def sobolev_round(xi, valence: str, M: int, geom: FrameGeometry, lowest: int = 0) -> float:
    """||xi||_{H^M} (round metric, Lie strings from the frame); orders lowest..M."""
    total = 0.0
    for k in range(lowest, M + 1):
        s = _round_sq(lie_strings(xi, valence, k, geom), len(valence) + k)
        total += geom.integrate(s)
    return float(np.sqrt(max(total, 0.0)))


def sup_round(xi, valence: str, geom: FrameGeometry) -> float:
    s = _round_sq(xi, len(valence))
    return float(np.sqrt(np.max(s)))


def high_norm_truncated(state: RescaledState, M: int, bg: FlrwBackground,
                        geom: FrameGeometry) -> float:
    """Order-M truncation of the solution norm; zero exactly on FLRW."""
    if M not in (0, 1, 2):
        raise ValueError("truncated high norm implemented for M in {0, 1, 2}")
    a = bg.scale(state.t)
    eye = T.identity_like(state.G)
    dG, dGi = state.G - eye, state.G_inv - eye
    a23 = a ** (2.0 / 3.0)
    val = (sobolev_round(state.Khat, "ul", M, geom)
           + a23 * sobolev_round(state.G, "ll", M + 1, geom, lowest=M + 1)
           + sobolev_round(dG, "ll", M, geom) + sobolev_round(dGi, "uu", M, geom)
           + sum(a23 ** L * sobolev_round(state.psi, "", M + L, geom, lowest=M + L) for L in (1, 2))
           + sobolev_round(state.psi, "", M, geom)
           + sobolev_round(state.Psi, "", M, geom)
           + a23 * sobolev_round(state.Phi, "l", M, geom))
    if M >= 1:
        val += sobolev_round(state.Phi, "l", M - 1, geom)
    val += (sup_round(state.Khat, "ul", geom) + sup_round(dG, "ll", geom) + sup_round(dGi, "uu", geom)
            + sup_round(state.psi, "", geom) + sup_round(state.Psi, "", geom)
            + sup_round(state.Phi, "l", geom))
    return float(val)


def norm_comparison_constant(state: RescaledState) -> float:
    """C with C^{-1}|xi|_round <= |xi|_G <= C |xi|_round for one-forms and vectors."""
    w = np.linalg.eigvalsh(np.moveaxis(np.asarray(state.G), (0, 1), (-2, -1)))
    return float(np.sqrt(max(w.max(), 1.0 / w.min())))
