"""Frame-component tensor calculus.

Arrays carry their frame indices on the leading axes and any spatial grid axes
trailing, so every contraction is an einsum with a trailing '...'.  A tensor's
valence is described by a string of 'u' (upper) and 'l' (lower) slots, e.g. the
metric is 'll', the trace-free second fundamental form K^a_b is 'ul'.

Conventions: G[a, b] lower, Ginv[a, b] upper, Z_A Z_B = dd[A, B], and the
connection gam[A, D, B] = Gamma_A^D_B with nabla_{Z_A} Z_B = Gamma_A^D_B Z_D.
Derivative indices of nabla T and Lie T always come first.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularMetric
from .frame import EPS, STRUCT

LETTERS = "pqrstuvwxyz"


def mm(x, y):
    return np.einsum("ab...,bc...->ac...", x, y)


def transpose(x):
    return np.swapaxes(x, 0, 1)


def sym(x):
    return 0.5 * (x + transpose(x))


def trace(x):
    return np.einsum("aa...->...", x)


def identity_like(x):
    shape = np.shape(x)[2:]
    return np.broadcast_to(np.eye(3).reshape((3, 3) + (1,) * len(shape)), (3, 3) + shape).copy()


def inverse(G, cond_max: float = 1e12):
    g = np.moveaxis(np.asarray(G, dtype=float), (0, 1), (-2, -1))
    w = np.linalg.eigvalsh(g)
    if np.any(w[..., 0] <= 0.0) or np.any(w[..., -1] / w[..., 0] > cond_max):
        raise SingularMetric(f"metric not safely invertible (min eigenvalue {w[..., 0].min():.3e})")
    return np.moveaxis(np.linalg.inv(g), (-2, -1), (0, 1))


def det(G):
    return np.linalg.det(np.moveaxis(np.asarray(G, dtype=float), (0, 1), (-2, -1)))


def min_eigenvalue(G):
    return np.linalg.eigvalsh(np.moveaxis(np.asarray(G, dtype=float), (0, 1), (-2, -1)))[..., 0]


def connection_lower(G, dG):
    """Gamma_ACB = <nabla_{Z_A} Z_B, Z_C>, with dG[A, b, c] = Z_A G_bc."""
    t1 = 0.5 * (np.einsum("abc...->acb...", dG) + np.einsum("bac...->acb...", dG)
                - np.einsum("cab...->acb...", dG))
    t2 = (np.einsum("abd,cd...->acb...", EPS, G) - np.einsum("bcd,ad...->acb...", EPS, G)
          - np.einsum("acd,bd...->acb...", EPS, G)) / 3.0
    return t1 + t2


def connection(G, dG, Ginv=None):
    """gam[A, D, B] = Ginv^{DC} Gamma_ACB."""
    if Ginv is None:
        Ginv = inverse(G)
    return np.einsum("dc...,acb...->adb...", Ginv, connection_lower(G, dG))


def _dconnection(G, Ginv, dG, ddG):
    """dgam[E, A, D, B] = Z_E gam[A, D, B]."""
    low = connection_lower(G, dG)
    dlow = np.stack([connection_lower(dG[e], ddG[e]) for e in range(3)])
    # Z_E Ginv = -Ginv (Z_E G) Ginv
    dGinv = -np.einsum("ab...,ebc...,cd...->ead...", Ginv, dG, Ginv)
    return (np.einsum("edc...,acb...->eadb...", dGinv, low)
            + np.einsum("dc...,eacb...->eadb...", Ginv, dlow))


def curvature_operator(gam, dgam):
    """R[A, B, C, E] = components of R(Z_A, Z_B) Z_C along Z_E."""
    r = (np.einsum("abec...->abce...", dgam) - np.einsum("baec...->abce...", dgam)
         + np.einsum("bdc...,aed...->abce...", gam, gam)
         - np.einsum("adc...,bed...->abce...", gam, gam)
         - np.einsum("abf,fec...->abce...", STRUCT, gam))
    return r


def curvature_frame(G, dG=None, ddG=None, Ginv=None):
    """Riemann (all lower), Ric^sharp (1,1) and scalar curvature of a frame metric.

    dG and ddG default to zero (spatially constant metric).  The Riemann sign is
    chosen so that the round metric gives (1/9)(G_ik G_jl - G_il G_jk).
    """
    G = np.asarray(G, dtype=float)
    if Ginv is None:
        Ginv = inverse(G)
    if dG is None:
        dG = np.zeros((3,) + G.shape)
    if ddG is None:
        ddG = np.zeros((3, 3) + G.shape)
    gam = connection(G, dG, Ginv)
    dgam = _dconnection(G, Ginv, dG, ddG)
    rop = curvature_operator(gam, dgam)
    riem = -np.einsum("de...,abce...->abcd...", G, rop)
    ric = np.einsum("abca...->bc...", rop)
    ric_sharp = mm(Ginv, ric)
    return riem, ric_sharp, trace(ric_sharp)


def ricci_sharp(G, dG, ddG, Ginv=None, low=None):
    """Ric^sharp and scalar curvature without assembling the full Riemann tensor.

    ddG = None marks a spatially constant metric (dG is then ignored).  `low` may
    pass in a precomputed connection_lower(G, dG).
    """
    if Ginv is None:
        Ginv = inverse(G)
    if low is None:
        low = connection_lower(G, np.zeros((3,) + np.shape(G)) if ddG is None else dG)
    gam = np.einsum("dc...,acb...->adb...", Ginv, low)
    v = np.einsum("ax...,axc...->c...", Ginv, low)
    ric = (np.einsum("bdc...,d...->bc...", gam, v)
           - np.einsum("adc...,bad...->bc...", gam, gam)
           - np.einsum("abf,fac...->bc...", STRUCT, gam))
    if ddG is not None:
        dlow = np.stack([connection_lower(dG[e], ddG[e]) for e in range(3)])
        # Z_E Ginv = -Ginv (Z_E G) Ginv
        dGinv = -np.einsum("ab...,ebc...->eac...", Ginv, np.einsum("ebc...,cd...->ebd...", dG, Ginv))
        # sum_A Z_A Gamma_B^A_C minus Z_B (sum_A Gamma_A^A_C)
        t1 = (np.einsum("aax...,bxc...->bc...", dGinv, low)
              + np.einsum("ax...,abxc...->bc...", Ginv, dlow))
        t2 = (np.einsum("bax...,axc...->bc...", dGinv, low)
              + np.einsum("ax...,baxc...->bc...", Ginv, dlow))
        ric = ric + t1 - t2
    rs = mm(Ginv, ric)
    return rs, trace(rs)


def _einsum_slots(n: int):
    return LETTERS[:n]


def covariant_derivative(T, valence: str, gam, dT):
    """(nabla T)[A, ...] given dT[A, ...] = Z_A T."""
    out = np.array(dT, dtype=float, copy=True)
    idx = _einsum_slots(len(valence))
    for k, kind in enumerate(valence):
        src = idx[:k] + "d" + idx[k + 1:]
        if kind == "l":
            out -= np.einsum(f"ad{idx[k]}...,{src}...->a{idx}...", gam, T)
        else:
            out += np.einsum(f"a{idx[k]}d...,{src}...->a{idx}...", gam, T)
    return out


def lie_derivative(T, valence: str, dT):
    """(Lie_{Z_A} T)[A, ...] for all three frame fields at once."""
    out = np.array(dT, dtype=float, copy=True)
    idx = _einsum_slots(len(valence))
    for k, kind in enumerate(valence):
        src = idx[:k] + "d" + idx[k + 1:]
        if kind == "l":
            out -= np.einsum(f"a{idx[k]}d,{src}...->a{idx}...", STRUCT, T)
        else:
            out += np.einsum(f"ad{idx[k]},{src}...->a{idx}...", STRUCT, T)
    return out


def lower_all(T, valence: str, G, Ginv):
    """Return T with every slot moved by the metric (lower slots raised, upper lowered)."""
    out = np.asarray(T, dtype=float)
    idx = _einsum_slots(len(valence))
    for k, kind in enumerate(valence):
        src = idx[:k] + "d" + idx[k + 1:]
        metric = Ginv if kind == "l" else G
        out = np.einsum(f"d{idx[k]}...,{src}...->{idx}...", metric, out)
    return out


def inner(S, T, valence: str, G, Ginv):
    """G-inner product of two tensors of the same valence."""
    idx = _einsum_slots(len(valence))
    return np.einsum(f"{idx}...,{idx}...->...", S, lower_all(T, valence, G, Ginv))


def norm_sq(T, valence: str, G, Ginv):
    return inner(T, T, valence, G, Ginv)


def norm(T, valence: str, G, Ginv):
    return np.sqrt(np.maximum(norm_sq(T, valence, G, Ginv), 0.0))


def hessian(psi, dpsi, ddpsi, gam):
    """(nabla nabla psi)_ab = Z_a Z_b psi - Gamma_a^D_b Z_D psi."""
    return ddpsi - np.einsum("adb...,d...->ab...", gam, dpsi)


def laplacian(psi, dpsi, ddpsi, gam, Ginv):
    return np.einsum("ab...,ab...->...", Ginv, hessian(psi, dpsi, ddpsi, gam))


def divergence_ul(K, dK, gam):
    """nabla_a K^a_j for a (1,1) tensor."""
    nk = covariant_derivative(K, "ul", gam, dK)
    return np.einsum("aaj...->j...", nk)


def round_metric(spatial_shape=()):
    return identity_like(np.zeros((3, 3) + tuple(spatial_shape)))
