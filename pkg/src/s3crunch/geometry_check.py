"""Oracle suite for the frame: orthonormality, brackets, chart consistency, round curvature."""

from __future__ import annotations

import numpy as np

from . import tensors as T
from .frame import (STRUCT, chart_coefficients, chart_coefficients_from_embedding, commutator_defect,
                    embed, frame_expansion_inverse_metric, frame_vector, round_inner,
                    round_inverse_metric_chart)


def bracket_test_function(eta, xi1, xi2):
    y = embed(eta, xi1, xi2) / 3.0
    return y[..., 0] * y[..., 2] + y[..., 1] ** 2 + np.sin(y[..., 3] + 0.5 * y[..., 0])


def random_chart_points(rng: np.random.Generator, n: int, margin: float = 0.2) -> np.ndarray:
    """Points with eta kept `margin` away from both chart poles."""
    eta = rng.uniform(margin, np.pi / 2 - margin, n)
    xi1 = rng.uniform(0.0, 2 * np.pi, n)
    xi2 = rng.uniform(0.0, 2 * np.pi, n)
    return np.stack([eta, xi1, xi2], axis=-1)


def bracket_defects(points, h: float, fd_order: int) -> np.ndarray:
    """Max over (A, B) of the finite-difference bracket defect at each point."""
    out = []
    for p in points:
        out.append(max(commutator_defect(A, B, bracket_test_function, tuple(p), h, fd_order)
                       for A in (1, 2, 3) for B in (1, 2, 3) if A < B))
    return np.array(out)


def verify_geometry(seed: int = 0, n_points: int = 20, fd_order: int = 2, h: float | None = None) -> dict:
    """Residuals of every frame oracle at n_points random points; all should be small.

    The bracket check is repeated at h and h/2 and the observed order reported.
    """
    rng = np.random.default_rng(seed)
    pts = random_chart_points(rng, n_points)
    eta, xi1, xi2 = pts.T
    y = embed(eta, xi1, xi2)
    Z = np.stack([frame_vector(A, y) for A in (1, 2, 3)])
    gram = np.einsum("a...k,b...k->ab...", Z, Z)
    ortho = float(np.abs(gram - np.eye(3)[:, :, None]).max())
    tangency = float(np.abs(round_inner(Z, y[None])).max())
    chart = float(np.abs(chart_coefficients(eta, xi1, xi2) - chart_coefficients_from_embedding(eta, xi1, xi2)).max())
    inv_metric = float(np.abs(frame_expansion_inverse_metric(eta, xi1, xi2) - round_inverse_metric_chart(eta)).max())

    # bracket relation of the constant matrices generating the frame (exact algebra)
    from .frame import FRAME_MATRICES
    alg = 0.0
    for A in range(3):
        for B in range(3):
            comm = FRAME_MATRICES[B] @ FRAME_MATRICES[A] - FRAME_MATRICES[A] @ FRAME_MATRICES[B]
            rhs = np.einsum("c,cij->ij", STRUCT[A, B], FRAME_MATRICES)
            alg = max(alg, float(np.abs(comm - rhs).max()))

    if h is None:
        h = {2: 2e-3, 4: 2e-2, 6: 5e-2}[fd_order]
    d1 = bracket_defects(pts, h, fd_order)
    d2 = bracket_defects(pts, h / 2, fd_order)
    orders = np.log2(d1 / np.maximum(d2, 1e-300))

    _, ric, R = T.curvature_frame(T.round_metric())
    return {
        "seed": seed, "n_points": n_points, "fd_order": fd_order, "h": h,
        "orthonormality": ortho,
        "tangency": tangency,
        "chart_coefficients": chart,
        "inverse_metric_expansion": inv_metric,
        "bracket_algebraic": alg,
        "bracket_fd_max": float(d1.max()),
        "bracket_fd_max_half_step": float(d2.max()),
        "bracket_fd_order_min": float(orders.min()),
        "bracket_fd_order_median": float(np.median(orders)),
        "round_scalar_curvature": float(abs(R - 2.0 / 3.0)),
        "round_ricci": float(np.abs(ric - (2.0 / 9.0) * np.eye(3)).max()),
    }
