"""Anisotropic dependence cone: speed, support tracking, and the modulus E_q.

The cone with vertex (x0, t0) has the pointwise slice predicate
|x - x0| <= c Phi(x) (t0 - t) for 0 <= t <= t0: slices shrink toward the
vertex, and the slope uses Phi at the evaluation point, which makes the
predicate nonlinear in x and is resolved by direct evaluation on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grids import Grid1D
from .hyperbolic import HyperbolicProblem

__all__ = [
    "Cone",
    "cone_speed",
    "support_interval",
    "cone_condition_check",
    "eq_modulus",
]

SUPPORT_THRESHOLD = 1e-8


@dataclass
class Cone:
    """Vertex (x0, t0), speed c > 0, and the anisotropy weight phi."""

    x0: float
    t0: float
    c: float
    phi: object   # WeightFunction (callable)

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("cone speed must be positive")
        if self.t0 <= 0:
            raise ValueError("vertex time must be positive")

    def slice_mask(self, grid: Grid1D, t: float) -> np.ndarray:
        """Boolean mask of the cone slice at time t in [0, t0]."""
        if not 0 <= t <= self.t0:
            raise ValueError("slice time must lie in [0, t0]")
        return np.abs(grid.x - self.x0) <= \
            self.c * np.asarray(self.phi(grid.x)) * (self.t0 - t)

    def shrunk(self, factor: float) -> "Cone":
        return Cone(self.x0, self.t0, self.c * factor, self.phi)


def cone_speed(prob: HyperbolicProblem, grid: Grid1D,
               t_samples: Optional[Sequence[float]] = None) -> float:
    """c = sup over (t, x, roots) of |tau_j(t, x, 1)| / Phi(x)."""
    if t_samples is None:
        t_samples = np.linspace(0.0, prob.T, 33)
    phi = np.asarray(prob.pm.phi(grid.x))
    sup = 0.0
    for t in t_samples:
        roots = prob.char_roots_all(float(t), grid.x, np.ones(1))
        sup = max(sup, float((np.abs(roots) / phi).max()))
    return sup


def support_interval(u: np.ndarray, grid: Grid1D,
                     threshold: float = SUPPORT_THRESHOLD,
                     peak: Optional[float] = None):
    """(x_lo, x_hi) bracketing {|u| > threshold * peak}, or None if empty."""
    peak = float(np.abs(u).max()) if peak is None else peak
    if peak == 0.0:
        return None
    idx = np.nonzero(np.abs(u) > threshold * peak)[0]
    if idx.size == 0:
        return None
    return float(grid.x[idx[0]]), float(grid.x[idx[-1]])


def cone_condition_check(ts: Sequence[float], states: Sequence[np.ndarray],
                         grid: Grid1D, cone: Cone,
                         threshold: float = SUPPORT_THRESHOLD,
                         tol_cells: int = 1) -> dict:
    """Slice-by-slice support/cone disjointness test.

    For each recorded time t <= t0 the support {|u| > threshold * peak}
    (peak taken globally over the trajectory) must avoid the cone slice;
    crossings are counted in grid cells and the run passes iff every slice
    has at most ``tol_cells`` violating cells.  Reports per-slice margins
    (distance from the support to the slice, in cells; negative = overlap).
    """
    states = [np.asarray(u) for u in states]
    if any(u.shape != (grid.n,) for u in states):
        raise ValueError("solution slices do not match the grid")
    peak = max((float(np.abs(u).max()) for u in states), default=0.0)
    margins = []
    worst = 0
    for t, u in zip(ts, states):
        if t > cone.t0:
            continue
        mask = cone.slice_mask(grid, float(t))
        if peak == 0.0:
            margins.append(float("inf"))
            continue
        supp = np.abs(u) > threshold * peak
        overlap = int(np.count_nonzero(mask & supp))
        worst = max(worst, overlap)
        if overlap:
            margins.append(-float(overlap))
        elif not mask.any() or not supp.any():
            margins.append(float("inf"))
        else:
            d = np.abs(np.nonzero(mask)[0][:, None]
                       - np.nonzero(supp)[0][None, :]).min()
            margins.append(float(d))
    return {
        "passed": bool(worst <= tol_cells),
        "worst_violation_cells": worst,
        "margins_cells": margins,
    }


def eq_modulus(tau: float, eps1: float, eps2: float, q: float) -> float:
    """Closed form of the singular-time modulus.

    q = 1: log(1 + (eps1 - eps2)/(tau + eps2));
    q > 1: ((tau+eps1)^(q-1) - (tau+eps2)^(q-1)) /
           ((q-1) ((tau+eps2)(tau+eps1))^(q-1)).
    Both equal the integral of r^-q over [tau+eps2, tau+eps1].
    """
    if not 0 <= eps2 <= eps1:
        raise ValueError("need 0 <= eps2 <= eps1")
    if tau < 0:
        raise ValueError("need tau >= 0")
    if not 1.0 <= q < 1.5:
        raise ValueError("need q in [1, 3/2)")
    if tau + eps2 <= 0:
        raise ValueError("lower endpoint tau + eps2 must be positive")
    if q == 1.0:
        return math.log(1.0 + (eps1 - eps2) / (tau + eps2))
    a, b = tau + eps2, tau + eps1
    return (b ** (q - 1.0) - a ** (q - 1.0)) / ((q - 1.0) * (a * b) ** (q - 1.0))
