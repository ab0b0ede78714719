"""Hopf-chart grid with centered finite differences and pole continuation.

eta nodes are cell centred, eta_i = (i + 1/2) pi / (2 n), so no node sits on a
chart pole.  Ghost rows below eta = 0 come from continuing through the pole,
f(-eta, xi1, xi2) = f(eta, xi1, xi2 + pi), and above pi/2 from
f(pi - eta, xi1, xi2) = f(eta, xi1 + pi, xi2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ConfigError, PoleRegularityViolation
from .frame import chart_coefficients, embed, fd_weights


@dataclass
class HopfGrid:
    n_eta: int
    n_xi1: int
    n_xi2: int
    fd_order: int = 2
    eta: np.ndarray = field(init=False, repr=False)
    xi1: np.ndarray = field(init=False, repr=False)
    xi2: np.ndarray = field(init=False, repr=False)
    coef: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_xi1 % 2 or self.n_xi2 % 2:
            raise ConfigError("n_xi1 and n_xi2 must be even for the pole continuation")
        half = self.fd_order // 2
        if self.n_eta < half + 1 or min(self.n_xi1, self.n_xi2) < self.fd_order + 1:
            raise ConfigError("grid too small for the requested fd_order")
        fd_weights(self.fd_order)
        self.d_eta = np.pi / (2 * self.n_eta)
        self.d_xi1 = 2 * np.pi / self.n_xi1
        self.d_xi2 = 2 * np.pi / self.n_xi2
        self.eta = (np.arange(self.n_eta) + 0.5) * self.d_eta
        self.xi1 = np.arange(self.n_xi1) * self.d_xi1
        self.xi2 = np.arange(self.n_xi2) * self.d_xi2
        e, x1, x2 = self.mesh()
        self.coef = chart_coefficients(e, x1, x2)
        self.weights = 27.0 * np.cos(e) * np.sin(e) * self.d_eta * self.d_xi1 * self.d_xi2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_eta, self.n_xi1, self.n_xi2)

    @property
    def h_min(self) -> float:
        """Smallest proper node spacing (radius-3 metric), attained next to the poles."""
        s = np.sin(self.eta[0])
        return 3.0 * min(self.d_eta, s * self.d_xi1, s * self.d_xi2)

    def mesh(self):
        return np.meshgrid(self.eta, self.xi1, self.xi2, indexing="ij")

    def points(self) -> np.ndarray:
        return embed(*self.mesh())

    def sample(self, func) -> np.ndarray:
        """Evaluate func(y) with y of shape (n_eta, n_xi1, n_xi2, 4)."""
        return func(self.points())

    def _shift_xi1(self, f):
        return np.roll(f, -self.n_xi1 // 2, axis=-2)

    def _shift_xi2(self, f):
        return np.roll(f, -self.n_xi2 // 2, axis=-1)

    def pad_eta(self, f: np.ndarray, width: int) -> np.ndarray:
        n = self.n_eta
        low = [self._shift_xi2(f[..., k, :, :]) for k in range(width)][::-1]
        high = [self._shift_xi1(f[..., n - 1 - k, :, :]) for k in range(width)]
        return np.concatenate([np.stack(low, axis=-3), f, np.stack(high, axis=-3)], axis=-3)

    def _pairs(self):
        offsets, w = fd_weights(self.fd_order)
        # centred first-derivative weights are antisymmetric: w(-k) = -w(k)
        return [(k, wk) for k, wk in zip(offsets, w) if k > 0]

    def _d_eta(self, f: np.ndarray) -> np.ndarray:
        half = self.fd_order // 2
        fp = self.pad_eta(f, half)
        n = self.n_eta
        out = 0.0
        for k, wk in self._pairs():
            out = out + wk * (fp[..., half + k:half + k + n, :, :] - fp[..., half - k:half - k + n, :, :])
        return out / self.d_eta

    def _d_xi(self, f: np.ndarray, axis: int) -> np.ndarray:
        half = self.fd_order // 2
        n = f.shape[axis]
        if axis == -2:
            fp = np.concatenate([f[..., n - half:, :], f, f[..., :half, :]], axis=-2)
            sl = lambda a, b: fp[..., a:b, :]
            h = self.d_xi1
        else:
            fp = np.concatenate([f[..., n - half:], f, f[..., :half]], axis=-1)
            sl = lambda a, b: fp[..., a:b]
            h = self.d_xi2
        out = 0.0
        for k, wk in self._pairs():
            out = out + wk * (sl(half + k, half + k + n) - sl(half - k, half - k + n))
        return out / h

    def partials(self, f: np.ndarray):
        f = np.asarray(f, dtype=float)
        return self._d_eta(f), self._d_xi(f, -2), self._d_xi(f, -1)

    def _apply(self, A: int, f: np.ndarray, p) -> np.ndarray:
        """Z_A f from precomputed partials p; 0-based frame label A."""
        c = self.coef[A]
        return c[0] * p[0] + c[1] * p[1] + c[2] * p[2]

    def grad(self, f: np.ndarray) -> np.ndarray:
        """(Z_1 f, Z_2 f, Z_3 f) stacked on a new leading axis."""
        f = np.asarray(f, dtype=float)
        p = self.partials(f)
        return np.stack([self._apply(a, f, p) for a in range(3)])

    def dissipation(self, f: np.ndarray, sigma: float) -> np.ndarray:
        """Kreiss-Oliger term of derivative order fd_order + 2, scaled by the proper spacing.

        Adds O(h^(fd_order + 1)) to smooth solutions and damps the grid-scale
        modes that the centred stencils leave undamped next to the poles.
        """
        f = np.asarray(f, dtype=float)
        r = self.fd_order // 2 + 1
        c = np.array([(-1.0) ** (k + r) * comb(2 * r, k) for k in range(2 * r + 1)])
        n = self.n_eta
        fp = self.pad_eta(f, r)
        d_eta = sum(ck * fp[..., k:k + n, :, :] for k, ck in enumerate(c))
        d_xi1 = sum(ck * np.roll(f, r - k, axis=-2) for k, ck in enumerate(c))
        d_xi2 = sum(ck * np.roll(f, r - k, axis=-1) for k, ck in enumerate(c))
        e = self.eta[:, None, None]
        h1 = 3.0 * np.cos(e) * self.d_xi1
        h2 = 3.0 * np.sin(e) * self.d_xi2
        scale = -sigma / 4.0 ** r
        return scale * (d_eta / (3.0 * self.d_eta) + d_xi1 / h1 + d_xi2 / h2)

    def apply_Z(self, A: int, f: np.ndarray, pole_tol: float | None = 0.1) -> np.ndarray:
        if A not in (1, 2, 3):
            raise ValueError("frame label must be 1, 2 or 3")
        if pole_tol is not None:
            self.check_pole_regularity(f, pole_tol)
        f = np.asarray(f, dtype=float)
        return self._apply(A - 1, f, self.partials(f))

    def pole_defect(self, f: np.ndarray) -> float:
        """Relative size of the degenerate-angle Fourier modes extrapolated to each pole.

        A regular field has mode m of the degenerate angle vanishing like eta^m at
        the pole; linear extrapolation from the first two rows (eta_1 = 3 eta_0)
        leaves only O(eta_0^2) for such fields and O(1) for irregular ones.
        """
        f = np.asarray(f, dtype=float)
        north = np.fft.rfft(f[..., :2, :, :], axis=-1)[..., 1:]
        south = np.fft.rfft(f[..., [-1, -2], :, :], axis=-2)[..., 1:, :]
        ext_n = 0.5 * (3.0 * north[..., 0, :, :] - north[..., 1, :, :]) / self.n_xi2
        ext_s = 0.5 * (3.0 * south[..., 0, :, :] - south[..., 1, :, :]) / self.n_xi1
        spread = 2.0 * max(np.abs(ext_n).max(), np.abs(ext_s).max())
        return float(spread / (np.abs(f).max() + 1e-300))

    def check_pole_regularity(self, f: np.ndarray, tol: float = 0.1) -> None:
        defect = self.pole_defect(f)
        if defect > tol:
            raise PoleRegularityViolation(f"field depends on the degenerate angle at a pole "
                                          f"(relative spread {defect:.3e} > {tol})")

    def integrate(self, density: np.ndarray) -> float:
        """Integral over the sphere against the round volume form."""
        return float(np.sum(self.weights * density))

    def great_circle_samples(self, f: np.ndarray) -> np.ndarray:
        """Values along the 4 n_eta uniformly spaced points of each meridian circle."""
        q0 = f
        q1 = self._shift_xi1(f)[..., ::-1, :, :]
        q2 = self._shift_xi1(self._shift_xi2(f))
        q3 = self._shift_xi2(f)[..., ::-1, :, :]
        return np.concatenate([q0, q1, q2, q3], axis=-3)

    def restrict_to(self, f: np.ndarray, coarse: "HopfGrid") -> np.ndarray:
        """Trigonometric interpolation of f onto the nodes of another grid.

        Interpolation is spectral in xi1, xi2 (periodic) and along the meridian
        circles through both poles in eta.
        """
        circ = self.great_circle_samples(np.asarray(f, dtype=float))
        circ = _fourier_resample(circ, self.n_xi1, coarse.n_xi1, axis=-2)
        circ = _fourier_resample(circ, self.n_xi2, coarse.n_xi2, axis=-1)
        n_circ = 4 * self.n_eta
        coeffs = np.fft.fft(circ, axis=-3) / n_circ
        modes = np.fft.fftfreq(n_circ, d=1.0 / n_circ)
        theta = coarse.eta - 0.5 * self.d_eta
        basis = np.exp(1j * np.outer(theta, modes))
        if n_circ % 2 == 0:
            basis[:, n_circ // 2] = np.cos(0.5 * n_circ * theta)
        out = np.einsum("tm,...mjk->...tjk", basis, coeffs)
        return out.real


def _fourier_resample(f: np.ndarray, n_from: int, n_to: int, axis: int) -> np.ndarray:
    """Periodic samples at j * 2 pi / n_from -> samples at j * 2 pi / n_to."""
    if n_from == n_to:
        return f
    if n_from % n_to == 0:
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(None, None, n_from // n_to)
        return f[tuple(idx)]
    coeffs = np.fft.fft(f, axis=axis) / n_from
    modes = np.fft.fftfreq(n_from, d=1.0 / n_from)
    x = np.arange(n_to) * 2 * np.pi / n_to
    basis = np.exp(1j * np.outer(x, modes))
    if n_from % 2 == 0:
        basis[:, n_from // 2] = np.cos(0.5 * n_from * x)
    moved = np.moveaxis(coeffs, axis, -1)
    return np.moveaxis(np.einsum("...m,tm->...t", moved, basis).real, -1, axis)
