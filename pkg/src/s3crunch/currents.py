"""Energy currents and their divergence identities at Lie order one.

Everything here is written for spatially homogeneous slices (frame components
constant in space), where the spatial divergence of a left-invariant current
vanishes and the identities reduce to pointwise statements in time.  Terms are
returned by name so that single terms can be scaled in mutation tests.
"""

from __future__ import annotations

import numpy as np

from . import tensors as T
from .flrw import FlrwBackground
from .frame import FrameGeometry
from .state import SQRT23, RescaledState, spatial_geometry

METRIC_ERROR_TERMS = ("N", "J_K", "B_grad", "J_grad", "B_mom")


def _require_homogeneous(state: RescaledState):
    if not state.homogeneous:
        raise ValueError("current identities are implemented for homogeneous slices only")


def _zeros_grad(x):
    return np.zeros((3,) + np.shape(x))


def lie_all(x, valence: str) -> np.ndarray:
    """Lie_{Z_A} x for A = 1..3 on a homogeneous slice (leading axis A)."""
    return T.lie_derivative(x, valence, _zeros_grad(x))


def nabla(x, valence: str, gam) -> np.ndarray:
    return T.covariant_derivative(x, valence, gam, _zeros_grad(x))


def raise_first(Ginv, x):
    """Raise the first slot of a tensor whose first two slots are lower."""
    return np.einsum("ac...,cb...->ab...", Ginv, x)


def principal_ricci_variation(h, G, Ginv, gam):
    """Second-order part of the first variation of Ric^sharp in direction h.

    -1/2 Lap h^sharp - 1/2 (nabla^2 tr h)^sharp + 1/2 nabla^sharp div h + 1/2 nabla (div h)^sharp
    """
    dh = nabla(h, "ll", gam)                       # [c, a, b]
    ddh = nabla(dh, "lll", gam)                    # [e, c, a, b]
    lap = np.einsum("ec...,ecab...->ab...", Ginv, ddh)
    trh = np.einsum("ab...,ab...->...", Ginv, h)
    dtr = nabla(trh, "", gam)
    ddtr = nabla(dtr, "l", gam)
    div = np.einsum("ca...,cab...->b...", Ginv, dh)
    ddiv = nabla(div, "l", gam)                    # [c, b] = nabla_c div_b
    up_first = raise_first(Ginv, ddiv)             # nabla^a div_b
    up_second = np.einsum("ac...,bc...->ab...", Ginv, ddiv)  # nabla_b div^a
    return 0.5 * (-raise_first(Ginv, lap) - raise_first(Ginv, ddtr) + up_first + up_second)


def ricci_variation_error(h, Ginv, ric_sharp, R):
    """Zeroth-order remainder of the first variation of Ric^sharp (three dimensions)."""
    H = raise_first(Ginv, h)
    S = ric_sharp
    eye = T.identity_like(H)
    trH = T.trace(H)
    return (1.5 * T.mm(S, H) + 0.5 * T.mm(H, S) - trH * S - T.trace(T.mm(S, H)) * eye
            - 0.5 * R * H + 0.5 * R * trH * eye)


def variation_of_connection(h, Ginv, gam):
    """dGamma[D, E, a] = 1/2 G^{EF} (nabla_D h_Fa + nabla_a h_DF - nabla_F h_Da)."""
    dh = nabla(h, "ll", gam)
    low = dh + np.einsum("adf...->dfa...", dh) - np.einsum("fda...->dfa...", dh)
    return 0.5 * np.einsum("ef...,dfa...->dea...", Ginv, low)


def _star(dgam, h):
    """(dGamma * h)_{Dab} = dGamma_D^E_a h_Eb + dGamma_D^E_b h_aE."""
    return np.einsum("dea...,eb...->dab...", dgam, h) + np.einsum("deb...,ae...->dab...", dgam, h)


def metric_current_zero(LK, dLG, G, Ginv, a):
    """J^0_metric = |Lie K|^2 + 1/4 a^{4/3} |nabla Lie G|^2."""
    return T.norm_sq(LK, "ul", G, Ginv) + 0.25 * a ** (4.0 / 3.0) * T.norm_sq(dLG, "lll", G, Ginv)


def sf_current_zero(dPsi, LPhi, G, Ginv, a):
    """J^0_sf = (Z Psi)^2 + a^{4/3} |Lie Phi|^2."""
    return dPsi ** 2 + a ** (4.0 / 3.0) * T.norm_sq(LPhi, "l", G, Ginv)


def commuted_terms(state: RescaledState, bg: FlrwBackground, A: int, geom: FrameGeometry | None = None):
    """Order-one commuted quantities and error terms for the frame field Z_A (0-based)."""
    _require_homogeneous(state)
    geom = geom if geom is not None else FrameGeometry()
    a, ap, _ = bg.eval(state.t)
    a43 = a ** (4.0 / 3.0)
    psi = float(state.psi)
    G, Gi, K, Phi = state.G, state.G_inv, state.Khat, state.Phi
    sg = spatial_geometry(state, geom)
    gam = sg.gam

    LG = lie_all(G, "ll")[A]
    LK = lie_all(K, "ul")[A]
    LPhi = lie_all(Phi, "l")[A]
    dLG = nabla(LG, "ll", gam)
    dLK = nabla(LK, "ul", gam)
    dK = nabla(K, "ul", gam)

    P = principal_ricci_variation(LG, G, Gi, gam)
    N = ricci_variation_error(LG, Gi, sg.ric_sharp, sg.scalar)

    up = np.einsum("ia...,a...->i...", Gi, Phi)
    outer = np.einsum("i...,j...->ij...", up, Phi)
    L_outer = lie_all(outer, "ul")[A]
    J_K = a43 * psi * N - ap * psi * LK - (1.0 + a43 * psi) * L_outer

    GK = T.sym(T.mm(G, K))
    dgam = variation_of_connection(GK, Gi, gam)
    # nabla sym(LG K): derivative slot first, lower pair symmetrized
    dLG_K = np.einsum("dac...,cb...->dab...", dLG, K)
    LG_dK = np.einsum("ac...,dcb...->dab...", LG, dK)
    core = 0.5 * ((dLG_K + LG_dK) + np.swapaxes(dLG_K + LG_dK, 1, 2)) - _star(dgam, LG)
    B_grad = -2.0 * core
    J_grad = -2.0 * psi * core + (2.0 / 3.0) * ap * psi * dLG

    B_down = np.einsum("aaj...->j...", dLK) + SQRT23 * LPhi
    # divergence on the second (raised) slot of Lie K
    B_up = np.einsum("cb...,bac...->a...", Gi, dLK) + SQRT23 * np.einsum("ab...,b...->a...", Gi, LPhi)

    return dict(LG=LG, LK=LK, LPhi=LPhi, dLG=dLG, dLK=dLK, P=P, N=N, J_K=J_K,
                B_grad=B_grad, J_grad=J_grad, B_down=B_down, B_up=B_up, a=a, ap=ap, psi=psi)


def metric_identity_terms(state: RescaledState, rate, bg: FlrwBackground, A: int,
                          geom: FrameGeometry | None = None) -> dict:
    """Named right-hand-side terms of the metric-current divergence identity for Z_A.

    `rate` carries the time derivatives of G and G^{-1} on this slice.
    """
    c = commuted_terms(state, bg, A, geom)
    a, ap, psi = c["a"], c["ap"], c["psi"]
    a13, a43, a53 = a ** (1.0 / 3.0), a ** (4.0 / 3.0), a ** (5.0 / 3.0)
    G, Gi = state.G, state.G_inv
    LK, dLG, LPhi = c["LK"], c["dLG"], c["LPhi"]
    lap_fac = 1.0 + a43 * psi

    grad_sq = T.norm_sq(dLG, "lll", G, Gi)
    metric_K = (np.einsum("ac...,bd...,ab...,cd...->...", rate.G, Gi, LK, LK)
                + np.einsum("ac...,bd...,ab...,cd...->...", G, rate.G_inv, LK, LK))
    metric_grad = (0.25 * a43 * np.einsum("de...,ab...,cf...,dac...,ebf...->...", rate.G_inv, Gi, Gi, dLG, dLG)
                   + 0.5 * a43 * np.einsum("de...,ab...,cf...,dac...,ebf...->...", Gi, rate.G_inv, Gi, dLG, dLG))
    trLG = np.einsum("ab...,ab...->...", Gi, c["LG"])
    grad_tr = np.zeros_like(c["B_down"])  # tr Lie G is constant on a homogeneous slice
    divLG = np.einsum("ca...,cab...->b...", Gi, dLG)
    divLG_up = np.einsum("ab...,b...->a...", Gi, divLG)
    grad_tr_up = np.einsum("ab...,b...->a...", Gi, grad_tr)
    B_mom = a13 * lap_fac * (np.einsum("a...,a...->...", grad_tr_up, c["B_down"])
                             - np.einsum("a...,a...->...", divLG_up, c["B_down"])
                             - np.einsum("a...,a...->...", divLG, c["B_up"]))
    phi_terms = (-SQRT23 * a13 * lap_fac * np.einsum("a...,a...->...", grad_tr_up, LPhi)
                 + 2.0 * SQRT23 * a13 * lap_fac * np.einsum("a...,a...->...", divLG_up, LPhi))
    return {
        "scale": (1.0 / 3.0) * ap * a13 * grad_sq,
        "phi": phi_terms,
        "metric_K": metric_K,
        "metric_grad": metric_grad,
        "B_grad": 0.5 * a13 * T.inner(dLG, c["B_grad"], "lll", G, Gi),
        "B_mom": B_mom,
        "volume": ap * a13 * psi * T.norm_sq(LK, "ul", G, Gi) + 0.25 * ap * a53 * psi * grad_sq,
        "J_K": 2.0 * a13 * T.inner(LK, c["J_K"], "ul", G, Gi),
        "N": 2.0 * a13 * T.inner(LK, c["N"], "ul", G, Gi),
        "J_grad": 0.5 * a53 * T.inner(dLG, c["J_grad"], "lll", G, Gi),
    }


def metric_current_density(state: RescaledState, bg: FlrwBackground, geom: FrameGeometry | None = None):
    """sum_A J^0_metric[Lie_{Z_A} K, Lie_{Z_A} G] on a homogeneous slice."""
    _require_homogeneous(state)
    geom = geom if geom is not None else FrameGeometry()
    a = bg.scale(state.t)
    gam = spatial_geometry(state, geom).gam
    LG = lie_all(state.G, "ll")
    LK = lie_all(state.Khat, "ul")
    return float(sum(metric_current_zero(LK[A], nabla(LG[A], "ll", gam), state.G, state.G_inv, a)
                     for A in range(3)))


def sf_order0_density(state: RescaledState, bg: FlrwBackground) -> float:
    """J^0_sf at Lie order zero: Psi^2 + a^{4/3} |Phi|^2."""
    a = bg.scale(state.t)
    return float(sf_current_zero(state.Psi, state.Phi, state.G, state.G_inv, a))


def sf_identity_terms(state: RescaledState, rate, bg: FlrwBackground, geom: FrameGeometry | None = None) -> dict:
    """Named right-hand-side terms of the order-zero scalar-field/lapse identity.

    The lapse equation is used to trade the linear Psi source for lapse terms,
    as in the combined scalar-field and lapse divergence identity.
    """
    _require_homogeneous(state)
    geom = geom if geom is not None else FrameGeometry()
    a, ap, _ = bg.eval(state.t)
    a13, a43, a53 = a ** (1.0 / 3.0), a ** (4.0 / 3.0), a ** (5.0 / 3.0)
    psi, Psi = float(state.psi), float(state.Psi)
    G, Gi = state.G, state.G_inv
    k2 = float(T.norm_sq(state.Khat, "ul", G, Gi))
    f = ap ** 2 + (2.0 / 3.0) * a43 + k2 + 2.0 * SQRT23 * Psi + Psi ** 2
    gam = spatial_geometry(state, geom).gam
    div_phi = float(np.einsum("ab...,ab...->...", Gi, nabla(state.Phi, "l", gam)))
    phi2 = float(T.norm_sq(state.Phi, "l", G, Gi))
    return {
        "lapse_quadratic": ap * a53 * f * psi ** 2,
        "lapse_border": ap * a13 * psi * (k2 + Psi ** 2),
        "time_border": -2.0 * a13 * ap * psi * Psi ** 2,
        "volume": ap * a13 * psi * (Psi ** 2 + a43 * phi2),
        "phi_scale": (4.0 / 3.0) * ap * a13 * phi2,
        "phi_metric": a43 * float(np.einsum("ab...,a...,b...->...", rate.G_inv, state.Phi, state.Phi)),
        "phi_div": 2.0 * a13 * (1.0 + a43 * psi) * Psi * div_phi,
    }
