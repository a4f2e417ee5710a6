"""Phase-space metrics, Planck functions, the exponent delta, and zones.

The base metric is Phi(x)^-2 |dx|^2 + <xi>_k^-2 |dxi|^2 with Planck function
h = (Phi <xi>_k)^-1.  Its conjugate-friendly companion has Planck function
h~ = (Phi <xi>_k)^(1/sigma - gamma), gamma = 1 - 1/sigma, which decays only
when sigma > 2 (strong uncertainty).  The time axis splits into an interior
and an exterior zone at t^q = N h(x, xi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .weights import WeightFunction
from .grids import log_log_slope

__all__ = [
    "PhaseMetric",
    "ConjugateMetric",
    "ZoneParams",
    "Zone",
    "delta_from",
    "planck",
    "planck_tilde",
    "strong_uncertainty_fit",
    "t_threshold",
    "zone_classify",
]


@dataclass
class PhaseMetric:
    """The (Phi, k) pair defining the base metric."""

    phi: WeightFunction
    k: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def bracket_xi(self, xi):
        """<xi>_k = (k^2 + xi^2)^(1/2), exact form."""
        return np.sqrt(self.k**2 + np.asarray(xi, dtype=float) ** 2)

    def weight(self, x, xi):
        """Phi(x) <xi>_k = 1/h."""
        return self.phi(x) * self.bracket_xi(xi)


@dataclass
class ConjugateMetric:
    """Companion metric carrying the Gevrey index sigma."""

    base: PhaseMetric
    sigma: float

    def __post_init__(self):
        if self.sigma < 3:
            raise ValueError("sigma must be >= 3")

    @property
    def gamma(self) -> float:
        return 1.0 - 1.0 / self.sigma


def delta_from(sigma: float, q: float) -> float:
    """Solve 1/sigma = (q - 1 + delta)/q for delta; guaranteed in (0, 1).

    Requires q in [1, 3/2) and 3 <= sigma < q/(q-1).
    """
    if not 1 <= q < 1.5:
        raise ValueError("q must lie in [1, 3/2)")
    limit = q / (q - 1) if q > 1 else np.inf
    if not 3 <= sigma < limit * (1 - 1e-12):
        raise ValueError(f"sigma must lie in [3, {limit}) for q = {q}")
    return q / sigma - q + 1.0


@dataclass
class ZoneParams:
    """Zone decomposition parameters (N, q, sigma, delta, T)."""

    N: float
    q: float
    sigma: float
    T: float
    delta: float = field(init=False)

    def __post_init__(self):
        if self.N <= 0 or self.T <= 0:
            raise ValueError("N and T must be positive")
        self.delta = delta_from(self.sigma, self.q)

    @property
    def gamma(self) -> float:
        return 1.0 - 1.0 / self.sigma


class Zone(Enum):
    CORE = "Core"
    INTERIOR = "Interior"
    EXTERIOR = "Exterior"


def planck(pm: PhaseMetric, x, xi):
    """h(x, xi) = (Phi(x) <xi>_k)^-1, always in (0, 1]."""
    return 1.0 / pm.weight(x, xi)


def planck_tilde(cm: ConjugateMetric, x, xi):
    """h~(x, xi) = (Phi <xi>_k)^(1/sigma - gamma) = h^(gamma - 1/sigma)."""
    expo = 1.0 / cm.sigma - cm.gamma
    return cm.base.weight(x, xi) ** expo


def strong_uncertainty_fit(cm: ConjugateMetric, grid, check_sigma: bool = True) -> dict:
    """Fit the decay exponent of h~ against 1 + |x| + |xi|.

    Regression runs along the three rays {x = 0}, {xi = 0}, {x = xi} and
    reports the least-squares slope of log h~ vs log(1 + |x| + |xi|) on each;
    the decay exponent kappa is minus the steepest slope.  For sigma <= 2 the
    companion Planck function does not decay and the fit reports failure.
    """
    grid = np.asarray(grid, dtype=float)
    pos = grid[grid > 0]
    rays = {
        "xi-axis": (np.zeros_like(pos), pos),
        "x-axis": (pos, np.zeros_like(pos)),
        "diagonal": (pos, pos),
    }
    slopes = {}
    for name, (xs, xis) in rays.items():
        ht = planck_tilde(cm, xs, xis)
        slopes[name] = log_log_slope(1.0 + np.abs(xs) + np.abs(xis), ht)
    kappa = -min(slopes.values())
    return {"slopes": slopes, "kappa": kappa, "decaying": bool(kappa > 0)}


def t_threshold(zp: ZoneParams, pm: PhaseMetric, x, xi):
    """Zone boundary t_{x,xi} = (N h(x, xi))^(1/q)."""
    return (zp.N * planck(pm, x, xi)) ** (1.0 / zp.q)


def zone_classify(zp: ZoneParams, pm: PhaseMetric, t, x, xi) -> Zone:
    """Classify (t, x, xi) into Core / Interior / Exterior.

    Core: |x| + |xi| <= N.  Otherwise Interior iff t < t_{x,xi}, Exterior iff
    t >= t_{x,xi} (boundary points resolve to Exterior).
    """
    if np.abs(x) + np.abs(xi) <= zp.N:
        return Zone.CORE
    return Zone.INTERIOR if t < t_threshold(zp, pm, x, xi) else Zone.EXTERIOR
