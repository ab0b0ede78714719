"""Global frame on the radius-3 three-sphere and its Hopf chart.

The frame fields are the linear vector fields y -> M_A y on R^4, each a sum of
two commuting rotations.  They are orthonormal for the induced round metric and
satisfy [Z_A, Z_B] = (2/3) eps_ABC Z_C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain

RADIUS = 3.0

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0

# [Z_A, Z_B] = STRUCT[A, B, C] Z_C
STRUCT = (2.0 / 3.0) * EPS

# rotation generators R_kl y = y_k e_l - y_l e_k (0-based axes)
def _rotation(k: int, l: int) -> np.ndarray:
    m = np.zeros((4, 4))
    m[l, k] = 1.0
    m[k, l] = -1.0
    return m


FRAME_MATRICES = np.stack([
    _rotation(0, 1) + _rotation(2, 3),
    _rotation(1, 2) + _rotation(0, 3),
    _rotation(0, 2) - _rotation(1, 3),
]) / RADIUS


def embed(eta, xi1, xi2) -> np.ndarray:
    """Hopf chart -> R^4, last axis holds the four components."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0.0) or np.any(eta > np.pi / 2) or not np.all(np.isfinite(eta)):
        raise OutOfDomain("eta must lie in [0, pi/2]")
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    if not (np.all(np.isfinite(xi1)) and np.all(np.isfinite(xi2))):
        raise OutOfDomain("xi angles must be finite")
    ce, se = np.cos(eta), np.sin(eta)
    return RADIUS * np.stack(np.broadcast_arrays(ce * np.cos(xi1), ce * np.sin(xi1),
                                                  se * np.cos(xi2), se * np.sin(xi2)), axis=-1)


def chart_tangents(eta, xi1, xi2) -> np.ndarray:
    """d y / d(eta, xi1, xi2), shape (..., 3, 4)."""
    eta, xi1, xi2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (eta, xi1, xi2)))
    ce, se = np.cos(eta), np.sin(eta)
    c1, s1, c2, s2 = np.cos(xi1), np.sin(xi1), np.cos(xi2), np.sin(xi2)
    z = np.zeros_like(eta)
    d_eta = np.stack([-se * c1, -se * s1, ce * c2, ce * s2], axis=-1)
    d_xi1 = np.stack([-ce * s1, ce * c1, z, z], axis=-1)
    d_xi2 = np.stack([z, z, -se * s2, se * c2], axis=-1)
    return RADIUS * np.stack([d_eta, d_xi1, d_xi2], axis=-2)


def frame_vector(A: int, y) -> np.ndarray:
    """Z_(A) at the point y (A in 1..3), as an R^4 vector."""
    if A not in (1, 2, 3):
        raise ValueError("frame label must be 1, 2 or 3")
    return np.asarray(y, dtype=float) @ FRAME_MATRICES[A - 1].T


def round_inner(u, v) -> np.ndarray:
    """Round-metric inner product of tangent vectors (induced Euclidean)."""
    return np.sum(np.asarray(u) * np.asarray(v), axis=-1)


def chart_coefficients(eta, xi1, xi2) -> np.ndarray:
    """Coefficients c[A, k] with Z_A = c_eta d_eta + c_xi1 d_xi1 + c_xi2 d_xi2.

    Shape (3, 3) + broadcast shape.  Singular at the chart poles, so callers keep
    0 < eta < pi/2.
    """
    eta, xi1, xi2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (eta, xi1, xi2)))
    third = 1.0 / 3.0
    tn, ct = np.tan(eta), 1.0 / np.tan(eta)
    s, c = np.sin(xi1 + xi2), np.cos(xi1 + xi2)
    zero, one = np.zeros_like(eta), np.ones_like(eta)
    return third * np.stack([
        np.stack([zero, one, one]),
        np.stack([s, -tn * c, ct * c]),
        np.stack([c, tn * s, -ct * s]),
    ])


def chart_coefficients_from_embedding(eta, xi1, xi2) -> np.ndarray:
    """Same coefficients obtained by projecting M_A y onto the chart tangents."""
    y = embed(eta, xi1, xi2)
    tang = chart_tangents(eta, xi1, xi2)
    gram = np.einsum("...ik,...jk->...ij", tang, tang)
    out = []
    for m in FRAME_MATRICES:
        v = y @ m.T
        rhs = np.einsum("...ik,...k->...i", tang, v)
        out.append(np.moveaxis(np.linalg.solve(gram, rhs[..., None])[..., 0], -1, 0))
    return np.stack(out)


def round_inverse_metric_chart(eta) -> np.ndarray:
    """Round inverse metric in (eta, xi1, xi2) coordinates."""
    eta = np.asarray(eta, dtype=float)
    z = np.zeros_like(eta)
    return np.stack([
        np.stack([np.full_like(eta, 1.0 / 9.0), z, z]),
        np.stack([z, 1.0 / (9.0 * np.cos(eta) ** 2), z]),
        np.stack([z, z, 1.0 / (9.0 * np.sin(eta) ** 2)]),
    ])


def frame_expansion_inverse_metric(eta, xi1, xi2) -> np.ndarray:
    """sum_A Z_A (x) Z_A in chart coordinates."""
    c = chart_coefficients(eta, xi1, xi2)
    return np.einsum("ak...,al...->kl...", c, c)


ROUND_VOLUME = 2.0 * np.pi ** 2 * RADIUS ** 3


def fd_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the centered first-derivative stencil."""
    if order not in (2, 4, 6):
        raise ValueError("fd_order must be 2, 4 or 6")
    table = {
        2: [-0.5, 0.0, 0.5],
        4: [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12],
        6: [-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60],
    }
    w = np.array(table[order])
    half = order // 2
    return np.arange(-half, half + 1), w


def apply_Z_pointwise(A: int, f, eta: float, xi1: float, xi2: float, h: float,
                      order: int = 2) -> float:
    """Z_A f at one chart point using centered differences of a callable f(eta, xi1, xi2)."""
    offsets, w = fd_weights(order)
    c = chart_coefficients(eta, xi1, xi2)[A - 1]
    d_eta = sum(wk * f(eta + k * h, xi1, xi2) for k, wk in zip(offsets, w)) / h
    d_xi1 = sum(wk * f(eta, xi1 + k * h, xi2) for k, wk in zip(offsets, w)) / h
    d_xi2 = sum(wk * f(eta, xi1, xi2 + k * h) for k, wk in zip(offsets, w)) / h
    return float(c[0] * d_eta + c[1] * d_xi1 + c[2] * d_xi2)


def commutator_defect(A: int, B: int, f, point, h: float, order: int = 2) -> float:
    """|[Z_A, Z_B] f - STRUCT[A,B,C] Z_C f| at a chart point, all by finite differences.

    The bracket side uses nested difference quotients; the structure-constant
    side uses the exact directional derivative via the embedding.
    """
    eta, xi1, xi2 = point

    def zb(e, a, b):
        return apply_Z_pointwise(B, f, e, a, b, h, order)

    def za(e, a, b):
        return apply_Z_pointwise(A, f, e, a, b, h, order)

    lhs = apply_Z_pointwise(A, zb, eta, xi1, xi2, h, order) - apply_Z_pointwise(B, za, eta, xi1, xi2, h, order)
    rhs = sum(STRUCT[A - 1, B - 1, C] * apply_Z_pointwise(C + 1, f, eta, xi1, xi2, h, order)
              for C in range(3))
    return abs(lhs - rhs)


@dataclass(frozen=True)
class FrameGeometry:
    """Frame plus an optional grid providing discrete Z-derivatives."""

    radius: float = RADIUS
    grid: object | None = None
    fd_order: int = 2

    @property
    def homogeneous(self) -> bool:
        return self.grid is None

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Stack (Z_1 f, Z_2 f, Z_3 f) along a new leading axis."""
        if self.grid is None:
            return np.zeros((3,) + np.shape(f))
        return self.grid.grad(f)

    def integrate(self, density: np.ndarray) -> float:
        """Integral against the round volume form; constants give value * Vol."""
        if self.grid is None:
            return float(density) * ROUND_VOLUME
        return self.grid.integrate(density)
