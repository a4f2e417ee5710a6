"""Infinite-order exponential conjugation and weighted Sobolev norms.

The central object is E^(s eps) = Op(exp(s eps (Phi(x)<xi>_k)^(1/sigma))),
s = +-1.  The module provides: the weighted norm ||Phi^s2 <D>_k^s1 E^(+eps) v||,
the similarity transform E^(+L) P E^(-L) with a behavioral (wave-packet)
remainder-order fit, Neumann inversion of I + R, the E^(+L)E^(-L) - I defect
sweep in k, and the exponential-weight continuity check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calculus import QuantizedOperator, operator_norm, quantize
from .grids import Grid1D, band_limited_probe, l2_norm, log_log_slope, wave_packet
from .phase_metric import PhaseMetric, planck
from .symbols import INFINITE_ORDER, GridSymbol, sample_symbol

__all__ = [
    "ExpWeight",
    "WeightedNormSpec",
    "ConjugationResult",
    "weighted_norm",
    "conjugate",
    "neumann_invert",
    "identity_defect_sweep",
    "exp_continuity_check",
    "lambda_profile",
    "lambda_profile_derivative",
]

OVERFLOW_EXPONENT = 700.0
DEFAULT_BUDGET = 0.1


@dataclass
class ExpWeight:
    """exp(sign * amplitude * (Phi(x)<xi>_k)^(1/sigma))."""

    pm: PhaseMetric
    sigma: float
    amplitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sigma < 3:
            raise ValueError("sigma must be >= 3")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def exponent(self, x, xi):
        return self.sign * self.amplitude * self.pm.weight(x, xi) ** (1.0 / self.sigma)

    def symbol(self, grid: Grid1D) -> GridSymbol:
        peak = self.amplitude * self.pm.weight(
            np.abs(grid.x).max(), np.abs(grid.xi).max()) ** (1.0 / self.sigma)
        if peak > OVERFLOW_EXPONENT:
            raise ValueError(
                f"exponent {peak:.1f} exceeds the overflow guard "
                f"{OVERFLOW_EXPONENT}; shrink the amplitude or the domain")
        order = (INFINITE_ORDER, INFINITE_ORDER) if self.sign > 0 else (0.0, 0.0)
        return sample_symbol(lambda x, xi: np.exp(self.exponent(x, xi)),
                             grid, order, gevrey=(self.sigma, self.sigma, self.sigma))

    def quantize(self, grid: Grid1D) -> QuantizedOperator:
        return quantize(self.symbol(grid))


@dataclass
class WeightedNormSpec:
    """Parameters (s1, s2, eps, sigma, k) of the weighted Sobolev norm."""

    s1: float = 0.0
    s2: float = 0.0
    eps: float = 0.0
    sigma: float = 3.0
    k: float = 1.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def weighted_norm(v: np.ndarray, spec: WeightedNormSpec, pm: PhaseMetric,
                  grid: Grid1D) -> float:
    """||Phi^s2 <D>_k^s1 E^(+eps) v|| on the grid."""
    v = np.asarray(v, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("grid function has non-finite entries")
    w = v
    if spec.eps > 0:
        w = ExpWeight(pm, spec.sigma, spec.eps, +1).quantize(grid).apply(w)
    if spec.s1 != 0:
        bracket = np.sqrt(spec.k**2 + grid.xi**2)
        w = grid.multiplier(bracket**spec.s1, w)
    if spec.s2 != 0:
        w = pm.phi(grid.x) ** spec.s2 * w
    return l2_norm(w, grid.dx)


# -- conjugation ------------------------------------------------------------

@dataclass
class ConjugationResult:
    principal: GridSymbol
    remainder: np.ndarray
    order_fit: dict


def conjugate(p: GridSymbol, lam: float, sigma: float, pm: PhaseMetric,
              budget: float = DEFAULT_BUDGET,
              xi0s: Sequence[float] = (8.0, 16.0, 32.0, 64.0),
              x0s: Optional[Sequence[float]] = None) -> ConjugationResult:
    """Similarity transform E^(+lam) P E^(-lam) = P + R.

    The principal symbol is returned unchanged; R is the dense defect
    operator.  Its order is fitted behaviorally: R is applied to Gaussian
    wave packets of width h(x0, xi0)^(1/2) and log ||R psi|| is regressed
    against log <xi0>_k (at fixed x0) and log Phi(x0) (at fixed xi0).
    """
    if lam >= budget:
        raise ValueError(f"lam = {lam} exceeds the conjugation budget {budget}")
    g = p.grid
    p_mat = quantize(p).matrix
    if lam == 0:
        fit = {"xi_slope": 0.0, "x_slope": 0.0, "packet_norms": []}
        return ConjugationResult(p, np.zeros_like(p_mat), fit)
    e_plus = ExpWeight(pm, sigma, lam, +1).quantize(g).matrix
    e_minus = ExpWeight(pm, sigma, lam, -1).quantize(g).matrix
    remainder = e_plus @ p_mat @ e_minus - p_mat

    if x0s is None:
        x0s = [0.0]
    fit = _packet_order_fit(remainder, g, pm, xi0s, x0s)
    return ConjugationResult(p, remainder, fit)


def _packet_order_fit(remainder, grid, pm, xi0s, x0s) -> dict:
    norms = []
    for xi0 in xi0s:
        x0 = x0s[0]
        width = math.sqrt(planck(pm, x0, xi0))
        psi = wave_packet(grid, x0, xi0, width)
        norms.append(l2_norm(remainder @ psi, grid.dx))
    brackets = pm.bracket_xi(np.asarray(xi0s, dtype=float))
    xi_slope = log_log_slope(brackets, np.maximum(norms, 1e-300))

    x_norms = []
    xi_ref = xi0s[len(xi0s) // 2]
    for x0 in x0s:
        width = math.sqrt(planck(pm, x0, xi_ref))
        psi = wave_packet(grid, x0, xi_ref, width)
        x_norms.append(l2_norm(remainder @ psi, grid.dx))
    phis = pm.phi(np.asarray(x0s, dtype=float))
    if np.ptp(phis) > 1e-12:
        x_slope = log_log_slope(phis, np.maximum(x_norms, 1e-300))
    else:
        x_slope = 0.0
    return {
        "xi_slope": float(xi_slope),
        "x_slope": float(x_slope),
        "packet_norms": [float(n) for n in norms],
        "x_packet_norms": [float(n) for n in x_norms],
    }


def neumann_invert(R, tol: float = 1e-10, validate_tol: float = 1e-8,
                   max_terms: int = 2000) -> dict:
    """Inverse of I + R by the geometric series sum_j (-R)^j.

    Requires the estimated norm of R below 1; the truncation stops when the
    current term's norm falls below ``tol``.  The inverse is validated
    against (I + R) inverse = I on band-limited probes.
    """
    m = R.matrix if isinstance(R, QuantizedOperator) else np.asarray(R)
    n = m.shape[0]
    norm_r = operator_norm(m)
    if norm_r >= 1.0:
        raise ValueError(f"Neumann series diverges: ||R|| = {norm_r:.4f} >= 1; "
                         "raise k")
    eye = np.eye(n)
    inv = eye.astype(complex).copy()
    term = eye.astype(complex).copy()
    n_terms = 1
    while n_terms < max_terms:
        term = -(m @ term)
        inv += term
        n_terms += 1
        if operator_norm(term) < tol:
            break
    # validation probe: (I + R) inv should be the identity
    grid = R.grid if isinstance(R, QuantizedOperator) else None
    if grid is not None:
        from .calculus import probe_discrepancy
        defect = probe_discrepancy((eye + m) @ inv, eye, grid)
    else:
        defect = float(np.abs((eye + m) @ inv - eye).max())
    if defect > validate_tol:
        raise ValueError(f"Neumann inverse failed validation: defect {defect:.3e}")
    return {"inverse": inv, "norm": norm_r, "n_terms": n_terms, "defect": defect}


def identity_defect_sweep(phi, sigma: float, lam: float, grid: Grid1D,
                          ks: Sequence[float] = (8.0, 16.0, 32.0, 64.0)) -> dict:
    """||E^(+lam) E^(-lam) - I|| across k, with the log-log decay slope."""
    norms = []
    for k in ks:
        pm = PhaseMetric(phi, k=k)
        e_plus = ExpWeight(pm, sigma, lam, +1).quantize(grid).matrix
        e_minus = ExpWeight(pm, sigma, lam, -1).quantize(grid).matrix
        norms.append(operator_norm(e_plus @ e_minus - np.eye(grid.n)))
    slope = log_log_slope(np.asarray(ks, dtype=float),
                          np.maximum(norms, 1e-300))
    return {"ks": list(ks), "norms": [float(n) for n in norms],
            "slope": float(slope),
            "contractive": [bool(n < 1.0) for n in norms]}


def exp_continuity_check(eps: float, eps_prime: float, spec: WeightedNormSpec,
                         pm: PhaseMetric, grid: Grid1D, n_probes: int = 32,
                         seed: int = 0) -> dict:
    """Probe-ratio estimate of E^(+eps): H^{s,eps'} -> H^{s,eps'-eps}.

    Reports max over probes of ||E^(+eps) v||_{s, eps'-eps} / ||v||_{s, eps'}.
    """
    if not 0 <= eps <= eps_prime:
        raise ValueError("need 0 <= eps <= eps'")
    rng = np.random.default_rng(seed)
    target = WeightedNormSpec(spec.s1, spec.s2, eps_prime - eps, spec.sigma, spec.k)
    source = WeightedNormSpec(spec.s1, spec.s2, eps_prime, spec.sigma, spec.k)
    if eps > 0:
        e_op = ExpWeight(pm, spec.sigma, eps, +1).quantize(grid)
    ratios = []
    for _ in range(n_probes):
        v = band_limited_probe(grid, rng)
        ev = e_op.apply(v) if eps > 0 else v
        ratios.append(weighted_norm(ev, target, pm, grid)
                      / weighted_norm(v, source, pm, grid))
    return {"max_ratio": float(max(ratios)), "ratios": [float(r) for r in ratios]}


# -- the time-dependent budget ----------------------------------------------

def lambda_profile(lam: float, delta: float, T: float):
    """Lambda(t) = (lam/delta)(T^delta - t^delta), decreasing to 0 at t = T."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")

    def profile(t):
        return (lam / delta) * (T**delta - np.asarray(t, dtype=float) ** delta)

    return profile


def lambda_profile_derivative(lam: float, delta: float):
    """-Lambda'(t) = lam t^(delta-1) (the damping rate used by the solver)."""

    def rate(t):
        return lam * np.asarray(t, dtype=float) ** (delta - 1.0)

    return rate
