"""Periodic grid infrastructure shared by every module.

All operator work happens on a uniform grid of ``n`` points covering
``[-X, X)`` with the periodic extension implied by the FFT.  Frequencies are
kept in *ascending* order (``fftshift`` of the usual FFT layout) so that
finite-difference stencils in the frequency direction make sense; the
transform helpers take care of the reordering.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Grid1D",
    "fd_derivative",
    "FD_MARGIN",
    "l2_norm",
    "band_limited_probe",
    "wave_packet",
    "log_log_slope",
]


class Grid1D:
    """Uniform periodic spatial grid with its FFT-compatible frequency grid.

    Parameters
    ----------
    half_width:
        X in [-X, X); the grid is periodic with period 2X.
    n:
        number of points (must be even, power of two recommended).
    """

    def __init__(self, half_width: float, n: int):
        if n < 8 or n % 2:
            raise ValueError("grid size must be even and at least 8")
        self.half_width = float(half_width)
        self.n = int(n)
        self.dx = 2.0 * self.half_width / self.n
        self.x = -self.half_width + self.dx * np.arange(self.n)
        self._xi_unshifted = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        self.xi = np.fft.fftshift(self._xi_unshifted)
        self.dxi = np.pi / self.half_width

    # -- transforms -------------------------------------------------------
    def forward(self, u: np.ndarray) -> np.ndarray:
        """Coefficients c_j = sum_l u(x_l) exp(-i xi_j x_l), ascending xi."""
        c = np.fft.fft(u, axis=-1) * np.exp(-1j * self._xi_unshifted * self.x[0])
        return np.fft.fftshift(c, axes=-1)

    def inverse(self, c: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward` (includes the 1/n factor)."""
        c_uns = np.fft.ifftshift(c, axes=-1)
        return np.fft.ifft(c_uns * np.exp(1j * self._xi_unshifted * self.x[0]), axis=-1)

    def multiplier(self, m_of_xi: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Apply a Fourier multiplier given by its values on the ascending grid."""
        return self.inverse(m_of_xi * self.forward(u))

    def __eq__(self, other):
        return (
            isinstance(other, Grid1D)
            and other.n == self.n
            and other.half_width == self.half_width
        )

    def __hash__(self):
        return hash((self.half_width, self.n))

    def __repr__(self):
        return f"Grid1D(half_width={self.half_width}, n={self.n})"


def l2_norm(u: np.ndarray, dx: float) -> float:
    """Discrete L2 norm with the trapezoid (= rectangle, periodic) rule."""
    return float(np.sqrt(dx * np.sum(np.abs(u) ** 2, axis=-1)))


# -- finite differences ---------------------------------------------------

# Central stencils of 4th order accuracy for derivative orders 1..4,
# coefficients listed left to right over symmetric offsets.
_FD_COEFFS = {
    1: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
    2: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
    3: np.array([1 / 8, -1.0, 13 / 8, 0.0, -13 / 8, 1.0, -1 / 8]),
    4: np.array([-1 / 6, 2.0, -13 / 2, 28 / 3, -13 / 2, 2.0, -1 / 6]),
}

#: points to trim from each edge before trusting fd_derivative output
FD_MARGIN = 3


def fd_derivative(values: np.ndarray, order: int, spacing: float, axis: int = -1) -> np.ndarray:
    """Central finite difference of the given order (4th-order accurate).

    Edge values are computed against an edge-replicated padding and are only
    reliable ``FD_MARGIN`` points into the array; callers that take suprema
    should restrict to the interior.
    """
    if order == 0:
        return values.copy()
    if order not in _FD_COEFFS:
        raise ValueError(f"derivative order {order} not supported (max 4)")
    coeffs = _FD_COEFFS[order]
    m = len(coeffs) // 2
    a = np.moveaxis(np.asarray(values), axis, -1)
    pad = [(0, 0)] * (a.ndim - 1) + [(m, m)]
    ap = np.pad(a, pad, mode="edge")
    out = np.zeros(a.shape, dtype=np.result_type(a.dtype, float))
    n = a.shape[-1]
    for k, ck in enumerate(coeffs):
        if ck:
            out += ck * ap[..., k : k + n]
    out /= spacing**order
    return np.moveaxis(out, -1, axis)


def interior(values: np.ndarray, margin: int = FD_MARGIN) -> np.ndarray:
    """Trim ``margin`` points from each end of every axis."""
    sl = tuple(slice(margin, s - margin) for s in values.shape)
    return values[sl]


# -- probe functions ------------------------------------------------------

def band_limited_probe(
    grid: Grid1D,
    rng: np.random.Generator,
    band_frac: float = 0.25,
    envelope_frac: float = 0.125,
) -> np.ndarray:
    """Random band-limited test function, unit L2 norm.

    Spectrum restricted to ``|xi| <= band_frac * xi_max``; a Gaussian spatial
    envelope (std = envelope_frac * X) keeps values near the periodic seam at
    round-off level so that non-periodic symbols do not alias.  Pass
    ``envelope_frac=None`` to skip the envelope.
    """
    xi_max = np.abs(grid.xi).max()
    mask = np.abs(grid.xi) <= band_frac * xi_max
    c = (rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)) * mask
    u = grid.inverse(c)
    if envelope_frac is not None:
        u = u * np.exp(-0.5 * (grid.x / (envelope_frac * grid.half_width)) ** 2)
    return u / l2_norm(u, grid.dx)


def wave_packet(grid: Grid1D, x0: float, xi0: float, width: float) -> np.ndarray:
    """Gaussian wave packet centered at (x0, xi0), unit L2 norm."""
    g = np.exp(1j * xi0 * grid.x) * np.exp(-0.5 * ((grid.x - x0) / width) ** 2)
    return g / l2_norm(g, grid.dx)


def log_log_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
