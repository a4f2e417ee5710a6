"""Grid-sampled symbols, class-membership tests, and formal sums.

A symbol lives on the tensor grid (x_m, xi_j) with a declared order (m1, m2):
membership in the finite-order class requires

    |d_xi^a D_x^b p| <= C_ab <xi>_k^(m1-a) Phi(x)^(m2-b),

with Gevrey variants normalizing C_ab by B C^(a+b) (a!)^mu (b!)^nu, a
conjugation-adapted variant with weights <xi>_k^(m1 - gamma a + b/sigma)
Phi^(m2 - gamma b + a/sigma), and an exterior-analytic variant restricting
the supremum to Phi <xi>_k >= B a^sigma.  Derivatives are estimated by
4th-order central finite differences (max order 4).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grids import FD_MARGIN, Grid1D, fd_derivative
from .phase_metric import ConjugateMetric, PhaseMetric

__all__ = [
    "GridSymbol",
    "MembershipReport",
    "FormalSum",
    "sample_symbol",
    "membership_check",
    "assemble_formal_sum",
    "smooth_step",
    "excision",
    "INFINITE_ORDER",
]

#: sentinel order for infinite-order (exponential) symbols
INFINITE_ORDER = math.inf


@dataclass
class GridSymbol:
    """Complex samples of p(x, xi) with a declared order.

    ``evaluator`` (when provided) allows exact resampling, e.g. at -xi for
    transposes.  ``values[i, j]`` corresponds to ``grid.x[i]``, ``grid.xi[j]``.
    """

    grid: Grid1D
    values: np.ndarray
    order: tuple = (0.0, 0.0)
    gevrey: Optional[tuple] = None
    evaluator: Optional[Callable] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("symbol values must be (n_x, n_xi) on the shared grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("symbol contains non-finite values")

    @property
    def is_infinite_order(self) -> bool:
        return math.isinf(self.order[0]) or math.isinf(self.order[1])

    def derivative(self, a: int, b: int) -> np.ndarray:
        """d_xi^a D_x^b of the samples; D_x = -i d_x.  Finite differences."""
        out = self.values
        if a:
            out = fd_derivative(out, a, self.grid.dxi, axis=1)
        if b:
            out = (-1j) ** b * fd_derivative(out, b, self.grid.dx, axis=0)
        return out

    def bound_constant(self, pm: PhaseMetric) -> float:
        """Smallest B with |p| <= B <xi>_k^m1 Phi^m2 on the grid."""
        w = pm.bracket_xi(self.grid.xi)[None, :] ** self.order[0] * pm.phi(
            self.grid.x
        )[:, None] ** self.order[1]
        return float(np.max(np.abs(self.values) / w))

    # -- binary container -------------------------------------------------
    _MAGIC = b"PCGS"

    def to_bytes(self) -> bytes:
        """Little-endian container: header, grids, row-major complex values."""
        head = struct.pack(
            "<4sIQQdd",
            self._MAGIC,
            1,
            self.grid.n,
            self.grid.n,
            self.order[0],
            self.order[1],
        )
        if self.gevrey is not None:
            head += struct.pack("<Bddd", 1, *self.gevrey)
        else:
            head += struct.pack("<Bddd", 0, 0.0, 0.0, 0.0)
        body = (
            self.grid.x.astype("<f8").tobytes()
            + self.grid.xi.astype("<f8").tobytes()
            + np.ascontiguousarray(self.values, dtype="<c16").tobytes()
        )
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridSymbol":
        off = struct.calcsize("<4sIQQdd")
        magic, version, n_x, n_xi, m1, m2 = struct.unpack("<4sIQQdd", blob[:off])
        if magic != cls._MAGIC or version != 1:
            raise ValueError("not a grid-symbol container")
        has_g, mu, nu, sg = struct.unpack("<Bddd", blob[off : off + 25])
        off += 25
        x = np.frombuffer(blob, dtype="<f8", count=n_x, offset=off)
        off += 8 * n_x
        off += 8 * n_xi  # xi grid is implied by x; skip
        values = np.frombuffer(blob, dtype="<c16", count=n_x * n_xi, offset=off)
        grid = Grid1D(half_width=-x[0], n=n_x)
        if not np.allclose(grid.x, x):
            raise ValueError("stored grid is not the expected uniform periodic grid")
        return cls(
            grid=grid,
            values=values.reshape(n_x, n_xi).copy(),
            order=(m1, m2),
            gevrey=(mu, nu, sg) if has_g else None,
        )


def sample_symbol(
    evaluator: Callable,
    grid: Grid1D,
    order: tuple,
    gevrey: Optional[tuple] = None,
) -> GridSymbol:
    """Sample ``evaluator(x, xi)`` on the tensor grid (broadcasting arrays)."""
    vals = np.asarray(evaluator(grid.x[:, None], grid.xi[None, :]), dtype=complex)
    vals = np.broadcast_to(vals, (grid.n, grid.n)).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"non-finite symbol value at x = {grid.x[i]}, xi = {grid.xi[j]}"
        )
    return GridSymbol(grid=grid, values=vals, order=order, gevrey=gevrey, evaluator=evaluator)


# -- membership -----------------------------------------------------------

@dataclass
class MembershipReport:
    variant: str
    order: tuple
    constants: dict
    B: float
    C: float
    passed: bool
    worst_point: tuple
    edge_ratio: float
    drift: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "order": list(self.order),
                "constants": {f"{a},{b}": c for (a, b), c in self.constants.items()},
                "B": self.B,
                "C": self.C,
                "passed": self.passed,
                "worst_point": list(self.worst_point),
                "edge_ratio": self.edge_ratio,
                "drift": self.drift,
            },
            indent=2,
            sort_keys=True,
        )


def _variant_weight(variant, pm, sigma, m1, m2, a, b, X, XI):
    br = np.sqrt(pm.k**2 + XI**2)
    phi = pm.phi(X)
    if variant in ("finite", "gevrey", "exterior"):
        return br ** (m1 - a) * phi ** (m2 - b)
    if variant == "conjugated":
        gamma = 1.0 - 1.0 / sigma
        return br ** (m1 - gamma * a + b / sigma) * phi ** (m2 - gamma * b + a / sigma)
    raise ValueError(f"unknown membership variant {variant!r}")


def _variant_gevrey(variant, gevrey, sigma):
    if variant == "conjugated":
        return (sigma, sigma)
    if variant == "exterior":
        return (1.0, sigma)
    if gevrey is not None:
        return gevrey[:2]
    # default analytic-type normalization: factorial growth of the fitted
    # constants is absorbed so that C can stabilize
    return (1.0, 1.0)


def _scan(sym, pm, variant, sigma, max_order, B_restrict):
    m1, m2 = sym.order
    g = sym.grid
    X = g.x[:, None]
    XI = g.xi[None, :]
    inner = slice(FD_MARGIN, g.n - FD_MARGIN)
    constants, worst = {}, (0.0, 0.0)
    worst_val = -1.0
    edge_ratio = 1.0
    psi = pm.phi(g.x)[:, None] * pm.bracket_xi(g.xi)[None, :]
    for a in range(max_order + 1):
        for b in range(max_order + 1 - a):
            quot = np.abs(sym.derivative(a, b)) / _variant_weight(
                variant, pm, sigma, m1, m2, a, b, X, XI
            )
            quot_in = quot[inner, inner]
            if variant == "exterior" and B_restrict is not None:
                mask = psi[inner, inner] >= B_restrict * max(a, 1) ** sigma
                if not mask.any():
                    continue
                quot_in = np.where(mask, quot_in, 0.0)
            c = float(np.max(quot_in))
            constants[(a, b)] = c
            if a + b == 0:
                # edge-growth detector: sup over the full inner region vs the
                # sup over the half-extent core; bounded symbols stay flat
                ni = quot_in.shape[0]
                core = slice(ni // 4, 3 * ni // 4)
                c_core = float(np.max(quot_in[core, core]))
                edge_ratio = c / max(c_core, 1e-300)
                i, j = np.unravel_index(np.argmax(quot_in), quot_in.shape)
                worst = (float(g.x[inner][i]), float(g.xi[inner][j]))
            if c > worst_val:
                worst_val = c
    return constants, worst, edge_ratio


def _gevrey_fit(constants, mu, nu):
    B = max(constants.get((0, 0), 0.0), 1e-300)
    C = 0.0
    for (a, b), c in constants.items():
        if a + b == 0 or c <= 1e-8 * B:  # skip round-off-level derivatives
            continue
        norm = c / (B * math.factorial(a) ** mu * math.factorial(b) ** nu)
        C = max(C, norm ** (1.0 / (a + b)))
    return B, C


def membership_check(
    sym: GridSymbol,
    pm: PhaseMetric,
    variant: str = "finite",
    max_order: int = 3,
    tol: float = 0.15,
    sigma: Optional[float] = None,
    B_restrict: Optional[float] = None,
    edge_tol: float = 1.35,
) -> MembershipReport:
    """Numerical class-membership test for the declared order.

    Fits per-(a, b) constants up to ``max_order`` (<= 4, the finite-difference
    depth limit) then the Gevrey pair (B, C).  A symbol passes when the fitted
    C is stable (<= ``tol`` relative drift) under raising max_order from 3 to
    4 and the zeroth quotient shows no edge growth (ratio <= ``edge_tol``
    between full-grid and half-extent suprema).  Infinite-order symbols never
    pass by construction.
    """
    if max_order > 4:
        raise ValueError("max_order capped at 4 (finite-difference depth)")
    if 2 * FD_MARGIN + 7 > sym.grid.n:
        raise ValueError("grid too coarse for requested derivative order")
    if sigma is None:
        sigma = sym.gevrey[2] if sym.gevrey else 3.0

    full, worst, edge_ratio = _scan(sym, pm, variant, sigma, 4, B_restrict)
    constants = {k: v for k, v in full.items() if sum(k) <= max_order}
    mu, nu = _variant_gevrey(variant, sym.gevrey, sigma)
    B, C = _gevrey_fit(constants, mu, nu)

    if sym.is_infinite_order:
        return MembershipReport(variant, sym.order, constants, B, C, False, worst,
                                edge_ratio, math.inf)

    # stability of the fitted C under deepening the derivative scan
    lo = {k: v for k, v in full.items() if sum(k) <= 3}
    _, c_lo = _gevrey_fit(lo, mu, nu)
    _, c_hi = _gevrey_fit(full, mu, nu)
    if max(c_lo, c_hi) <= 1e-6:  # derivatives at round-off level
        drift = 0.0
    else:
        drift = abs(c_hi - c_lo) / max(c_lo, 1e-300)
    passed = bool(np.isfinite(C) and drift <= tol and edge_ratio <= edge_tol)
    return MembershipReport(variant, sym.order, constants, B, C, passed, worst,
                            edge_ratio, drift)


# -- excision functions and formal sums -----------------------------------

_STEP_GRID = np.linspace(0.0, 1.0, 4097)
with np.errstate(divide="ignore", over="ignore"):
    _bump = np.exp(-1.0 / np.clip(_STEP_GRID * (1.0 - _STEP_GRID), 1e-300, None))
_bump[0] = _bump[-1] = 0.0
_STEP_CDF = np.concatenate([[0.0], np.cumsum((_bump[1:] + _bump[:-1]) / 2)])
_STEP_CDF /= _STEP_CDF[-1]


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, bump-integral profile."""
    return np.interp(np.clip(s, 0.0, 1.0), _STEP_GRID, _STEP_CDF)


def excision(pm: PhaseMetric, grid: Grid1D, j: int, R: float, sigma: float) -> np.ndarray:
    """Cutoff phi_j: vanishes where Phi<xi>_k <= 2 R^2 max(j^sigma, 1) and
    equals 1 outside Phi<xi>_k >= 3 R^2 max(j^sigma, 1)."""
    if R <= 0:
        raise ValueError("excision radius R must be positive")
    rj = R**2 * max(float(j) ** sigma, 1.0)
    psi = pm.phi(grid.x)[:, None] * pm.bracket_xi(grid.xi)[None, :]
    return smooth_step((psi - 2.0 * rj) / rj)


@dataclass
class FormalSum:
    """Ordered terms p_j with the order-drop convention (m1-j, m2-j)."""

    terms: Sequence[GridSymbol]
    R: float
    pm: PhaseMetric
    sigma: float = 3.0

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("excision radius R must be positive")
        if len(self.terms) > 8:
            raise ValueError("desk scale caps formal sums at 8 terms")


def assemble_formal_sum(fs: FormalSum) -> GridSymbol:
    """Sum of phi_j p_j with the excision cutoffs phi_j."""
    if not fs.terms:
        raise ValueError("formal sum needs at least one term")
    grid = fs.terms[0].grid
    total = np.zeros((grid.n, grid.n), dtype=complex)
    for j, term in enumerate(fs.terms):
        if term.grid != grid:
            raise ValueError("formal-sum terms must share one grid")
        total += excision(fs.pm, grid, j, fs.R, fs.sigma) * term.values
    m1, m2 = fs.terms[0].order
    return GridSymbol(grid=grid, values=total, order=(m1, m2))
