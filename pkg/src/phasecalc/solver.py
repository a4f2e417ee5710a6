"""Time integration of the reduced system and its damped counterpart.

Pipeline: the first-order reduction supplies the generator; the nilpotent
diagonalizer isolates the diagonal transport part; the remaining lower-order
block is conjugated by the exponential weight; the t^(delta-1)-singular
damping is integrated exactly by an integrating factor (Strang splitting with
the eigendecomposition of the Hermitian part of the damping operator).  On
top sit the Gronwall-constant fit against the recorded energy trace and the
numerical eigenvalue floor of symmetrized operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .calculus import QuantizedOperator, operator_norm, quantize
from .conjugation import (
    DEFAULT_BUDGET,
    ExpWeight,
    WeightedNormSpec,
    lambda_profile,
    weighted_norm,
)
from .grids import Grid1D, l2_norm
from .hyperbolic import (
    HyperbolicProblem,
    Mollifier,
    build_diagonalizer,
    build_first_order,
    mollify_root,
)
from .phase_metric import PhaseMetric, delta_from
from .symbols import GridSymbol

__all__ = [
    "EnergyTrace",
    "Trajectory",
    "SolveReport",
    "cfl_timestep",
    "time_step_solve",
    "assemble_damping",
    "conjugated_solve",
    "garding_floor",
    "select_lambda",
    "gronwall_fit",
]

CFL_NUMBER = 0.5
BLOWUP_FACTOR = 1e6


# -- trajectories and traces -------------------------------------------------

@dataclass
class EnergyTrace:
    """Per-step energies: t, ||W||_L2, damped weighted norm, cumulative source.

    ``cumF`` is the squared-consistent cumulative integral of ||F||^2
    (trapezoid); ``cumF_literal`` keeps the unsquared integral of ||F|| as the
    alternative metric.
    """

    t: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    weighted: list = field(default_factory=list)
    cumF: list = field(default_factory=list)
    cumF_literal: list = field(default_factory=list)

    def validate(self):
        if any(v < 0 for v in self.l2 + self.weighted + self.cumF):
            raise ValueError("energy trace contains negative norms")
        if any(b < a - 1e-15 for a, b in zip(self.cumF, self.cumF[1:])):
            raise ValueError("cumulative source integral must be monotone")

    def rows(self):
        return list(zip(self.t, self.l2, self.weighted, self.cumF))


@dataclass
class Trajectory:
    ts: np.ndarray
    states: list
    grid: Grid1D
    trace: Optional[EnergyTrace] = None

    def norms(self) -> np.ndarray:
        return np.array([l2_norm(w, self.grid.dx) for w in self.states])


@dataclass
class SolveReport:
    trajectory: Trajectory
    gronwall_C: float
    floor: float
    cfl_dt: float
    refinement_flags: dict


def cfl_timestep(grid: Grid1D, max_speed: float, cfl: float = CFL_NUMBER) -> float:
    """dt <= cfl * dx / max_speed, the transport stability bound."""
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    return cfl * grid.dx / max_speed


def _as_sampler(system):
    if callable(system):
        return system
    mat = np.asarray(system)
    return lambda t: mat


def time_step_solve(system, W0: np.ndarray, F: Optional[Callable], dt: float,
                    t_range: Sequence[float], grid: Grid1D) -> Trajectory:
    """Classical RK4 on d/dt W = A(t) W + F(t).

    ``system`` is a dense matrix or a sampler t -> matrix; ``F`` is a sampler
    t -> vector or None.  Raises on blow-up (norm growth beyond 1e6x).
    """
    A = _as_sampler(system)
    f = F if F is not None else (lambda t: 0.0)
    t0, t1 = float(t_range[0]), float(t_range[1])
    n_steps = max(1, int(math.ceil((t1 - t0) / dt - 1e-12)))
    ts = t0 + dt * np.arange(n_steps + 1)
    ts[-1] = t1
    W = np.asarray(W0, dtype=complex).copy()
    ref = max(l2_norm(W, grid.dx), 1.0)
    states = [W.copy()]
    for i in range(n_steps):
        t = ts[i]
        h = ts[i + 1] - ts[i]
        k1 = A(t) @ W + f(t)
        k2 = A(t + h / 2) @ (W + h / 2 * k1) + f(t + h / 2)
        k3 = A(t + h / 2) @ (W + h / 2 * k2) + f(t + h / 2)
        k4 = A(t + h) @ (W + h * k3) + f(t + h)
        W = W + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if l2_norm(W, grid.dx) > BLOWUP_FACTOR * ref:
            raise RuntimeError(
                f"unstable step at t = {ts[i + 1]:.4f}: norm blew up; "
                "reduce dt toward the CFL bound")
        states.append(W.copy())
    return Trajectory(ts=ts, states=states, grid=grid)


# -- damping operator --------------------------------------------------------

def assemble_damping(pm: PhaseMetric, grid: Grid1D, sigma: float):
    """Eigendecomposition of the Hermitian part of Op((Phi <xi>_k)^(1/sigma)).

    Returns (V, evals) with S_h = V diag(evals) V*; the exact damping factor
    exp(-theta S_h) is then a cheap similarity per step.
    """
    vals = (pm.phi(grid.x)[:, None] * pm.bracket_xi(grid.xi)[None, :]) \
        ** (1.0 / sigma)
    s_mat = quantize(GridSymbol(grid, vals.astype(complex),
                                (1.0 / sigma, 1.0 / sigma))).matrix
    s_h = 0.5 * (s_mat + s_mat.conj().T)
    evals, V = scipy.linalg.eigh(s_h)
    return V, evals


def _damp(W: np.ndarray, V: np.ndarray, evals: np.ndarray, theta: float,
          m: int, n: int) -> np.ndarray:
    if theta == 0.0:
        return W
    out = np.empty_like(W)
    factor = np.exp(-theta * evals)
    for c in range(m):
        blk = W[c * n:(c + 1) * n]
        out[c * n:(c + 1) * n] = V @ (factor * (V.conj().T @ blk))
    return out


# -- the damped (conjugated) solve -------------------------------------------

def _block_diag(mat: np.ndarray, m: int) -> np.ndarray:
    n = mat.shape[0]
    out = np.zeros((m * n, m * n), dtype=complex)
    for c in range(m):
        out[c * n:(c + 1) * n, c * n:(c + 1) * n] = mat
    return out


def conjugated_solve(prob: HyperbolicProblem, lam: float, data: np.ndarray,
                     source: Optional[Callable], grid: Grid1D,
                     dt: Optional[float] = None, n_coarse: int = 5,
                     eps_cap: float = DEFAULT_BUDGET, T: Optional[float] = None,
                     s_spec: Optional[WeightedNormSpec] = None) -> Trajectory:
    """Damped evolution d/dt W = (D - B) W - lam t^(delta-1) S W + F.

    D is the diagonal transport part i Op(lambda_j) of the diagonalized
    first-order reduction, B the remaining lower-order block conjugated by
    the exponential weight at the capped amplitude, and S the (1/sigma)-power
    damping operator, integrated exactly through its Hermitian-part
    eigendecomposition (Strang splitting).  The energy trace records the L2
    norm, the decreasing-weight norm at eps = min(Lambda(t), eps_cap), and
    both cumulative source integrals.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    pm = prob.pm
    m, n = prob.m, grid.n
    T = prob.T if T is None else T
    delta = delta_from(prob.sigma, prob.q)
    profile = lambda_profile(lam, delta, T) if lam > 0 else (lambda t: 0.0 * np.asarray(t))
    rho = Mollifier()

    # coarse operator lattice: reduce + diagonalize + conjugate per node,
    # linear interpolation in t between nodes
    ts_c = np.linspace(0.0, T, max(2, n_coarse))
    eps_star = min(float(profile(0.0)), eps_cap) if lam > 0 else 0.0
    if eps_star > 0:
        e_plus = _block_diag(ExpWeight(pm, prob.sigma, eps_star, +1)
                             .quantize(grid).matrix, m)
        e_minus = _block_diag(ExpWeight(pm, prob.sigma, eps_star, -1)
                              .quantize(grid).matrix, m)
    mats = []
    X, XI = grid.x[:, None], grid.xi[None, :]
    for t_j in ts_c:
        sys_j = build_first_order(prob, grid, float(t_j), rho=rho)
        G = sys_j.generator()
        roots = np.stack([
            np.real(mollify_root(prob.char_root_sampler(j), pm, rho,
                                 float(t_j), X, XI, prob.T))
            for j in range(m)])
        diag = build_diagonalizer(np.sort(roots, axis=0), pm, grid, M=4.0)
        h_op = _quantize_blocks(diag.H_sym, grid)
        ht_op = _quantize_blocks(diag.H_tilde_sym, grid)
        # H is the pointwise eigenvector symbol of the bidiagonal part, so
        # the diagonalizing similarity is H~ G H
        g_diag = ht_op @ G @ h_op
        D = np.zeros_like(G)
        for c in range(m):
            D[c * n:(c + 1) * n, c * n:(c + 1) * n] = \
                sys_j.a1_blocks[c][c]
        B = D - g_diag
        if eps_star > 0:
            B = e_plus @ B @ e_minus
        mats.append(D - B)

    def A_of_t(t):
        t = min(max(t, ts_c[0]), ts_c[-1])
        j = min(int(np.searchsorted(ts_c, t, side="right")) - 1, len(ts_c) - 2)
        w = (t - ts_c[j]) / (ts_c[j + 1] - ts_c[j])
        return (1.0 - w) * mats[j] + w * mats[j + 1]

    V, evals = assemble_damping(pm, grid, prob.sigma)

    if dt is None:
        speed = _max_speed(prob, grid, ts_c)
        dt = cfl_timestep(grid, speed)
    n_steps = max(1, int(math.ceil(T / dt - 1e-12)))
    ts = np.linspace(0.0, T, n_steps + 1)

    f = source if source is not None else (lambda t: 0.0)
    W = np.asarray(data, dtype=complex).copy()
    if W.shape != (m * n,):
        raise ValueError(f"data must have shape ({m * n},)")
    ref = max(l2_norm(W, grid.dx), 1.0)
    spec0 = s_spec if s_spec is not None else WeightedNormSpec(sigma=prob.sigma,
                                                               k=pm.k)
    trace = EnergyTrace()
    cum2, cum1 = 0.0, 0.0
    prev_f = _source_norm(f, 0.0, grid)

    def record(t, W, cum2, cum1):
        eps_t = min(float(profile(t)), eps_cap) if lam > 0 else 0.0
        spec = WeightedNormSpec(spec0.s1, spec0.s2, eps_t, spec0.sigma, spec0.k)
        wn = sum(weighted_norm(W[c * n:(c + 1) * n], spec, pm, grid) ** 2
                 for c in range(m)) ** 0.5
        trace.t.append(float(t))
        trace.l2.append(l2_norm(W, grid.dx))
        trace.weighted.append(float(wn))
        trace.cumF.append(cum2)
        trace.cumF_literal.append(cum1)

    record(0.0, W, cum2, cum1)
    for i in range(n_steps):
        t, t_next = ts[i], ts[i + 1]
        h = t_next - t
        t_half = t + h / 2
        # exact damping over [t, t+h/2]
        theta = float(profile(t) - profile(t_half)) if lam > 0 else 0.0
        W = _damp(W, V, evals, theta, m, n)
        # RK4 transport + lower-order part over the full step
        k1 = A_of_t(t) @ W + f(t)
        k2 = A_of_t(t_half) @ (W + h / 2 * k1) + f(t_half)
        k3 = A_of_t(t_half) @ (W + h / 2 * k2) + f(t_half)
        k4 = A_of_t(t_next) @ (W + h * k3) + f(t_next)
        W = W + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        # exact damping over [t+h/2, t+h]
        theta = float(profile(t_half) - profile(t_next)) if lam > 0 else 0.0
        W = _damp(W, V, evals, theta, m, n)
        if l2_norm(W, grid.dx) > BLOWUP_FACTOR * ref:
            raise RuntimeError(f"unstable step at t = {t_next:.4f}")
        cur_f = _source_norm(f, t_next, grid)
        cum2 += h * 0.5 * (prev_f**2 + cur_f**2)
        cum1 += h * 0.5 * (prev_f + cur_f)
        prev_f = cur_f
        record(t_next, W, cum2, cum1)
    trace.validate()
    states = None  # full states kept only for the endpoints to bound memory
    return Trajectory(ts=ts, states=[np.asarray(data, complex), W], grid=grid,
                      trace=trace)


def _source_norm(f, t, grid) -> float:
    v = f(t)
    if np.isscalar(v) and v == 0.0:
        return 0.0
    return l2_norm(np.asarray(v, complex), grid.dx)


def _quantize_blocks(sym: np.ndarray, grid: Grid1D) -> np.ndarray:
    m, _, n, _ = sym.shape
    out = np.zeros((m * n, m * n), dtype=complex)
    for i in range(m):
        for j in range(m):
            if i == j or np.abs(sym[i, j]).max() > 0:
                out[i * n:(i + 1) * n, j * n:(j + 1) * n] = \
                    quantize(GridSymbol(grid, np.asarray(sym[i, j], complex),
                                        (0.0, 0.0))).matrix
    return out


def _max_speed(prob: HyperbolicProblem, grid: Grid1D, ts) -> float:
    sup = 0.0
    for t in ts:
        roots = prob.char_roots_all(float(t), grid.x[:, None],
                                    np.array([[1.0]]))
        sup = max(sup, float(np.abs(roots).max()))
    return sup


# -- eigenvalue floor and lambda selection -----------------------------------

def garding_floor(op) -> float:
    """Minimum eigenvalue of the symmetric part (A + A*)/2."""
    m = op.matrix if isinstance(op, QuantizedOperator) else np.asarray(op)
    sym = 0.5 * (m + m.conj().T)
    evals = scipy.linalg.eigvalsh(sym)
    if not np.all(np.isfinite(evals)):
        raise ValueError("eigenvalue solve failed on a degenerate matrix")
    return float(evals[0])


def select_lambda(s_mat: np.ndarray, b_mat: np.ndarray,
                  lams: Sequence[float] = (1.0, 5.0, 10.0, 50.0),
                  floor_tol: float = 0.0) -> dict:
    """Smallest lam in the sweep whose damped symmetric part clears the floor.

    Checks garding_floor(lam * S + (B + B*)/2) >= -floor_tol.
    """
    floors = []
    for lam in lams:
        fl = garding_floor(lam * s_mat + 0.5 * (b_mat + b_mat.conj().T))
        floors.append(fl)
        if fl >= -floor_tol:
            return {"lam": float(lam), "floor": fl,
                    "floors": [float(v) for v in floors]}
    raise ValueError("no lambda in the sweep clears the eigenvalue floor; "
                     f"floors = {floors}")


def gronwall_fit(trace: EnergyTrace) -> dict:
    """C = max_t ||W(t)||^2 / (||W(0)||^2 + int ||F||^2).

    The squared-consistent form is the headline constant; the
    unsquared-source alternative is reported alongside.
    """
    trace.validate()
    w0 = trace.l2[0]
    num = np.asarray(trace.l2) ** 2
    den2 = w0**2 + np.asarray(trace.cumF)
    den1 = w0**2 + np.asarray(trace.cumF_literal)
    if np.any(den2 <= 0):
        if np.any(num > 0):
            raise ValueError("degenerate trace: zero data and source with "
                             "nonzero state")
        return {"C": 1.0, "C_literal": 1.0}
    return {"C": float(np.max(num / den2)),
            "C_literal": float(np.max(num / den1))}
