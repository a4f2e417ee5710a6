"""Strictly hyperbolic model problems with time-singular coefficients.

Covers: coefficient growth/singularity axioms, characteristic roots with
margins, root mollification through the Planck-scale look-ahead average,
zone-wise estimates on the mollified roots, the reduction of the scalar
operator to a first-order pseudodifferential system, and the nilpotent
diagonalizer H = I + T with its exact inverse symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import compose_asymptotic, operator_norm, quantize
from .grids import Grid1D, l2_norm, log_log_slope, wave_packet
from .phase_metric import PhaseMetric, Zone, ZoneParams, planck, zone_classify
from .symbols import GridSymbol, sample_symbol, smooth_step
from .weights import BracketPower, bracket

__all__ = [
    "HyperbolicProblem",
    "Mollifier",
    "FirstOrderSystem",
    "DiagonalizerResult",
    "oscillating_factor",
    "oscillating_factor_derivative",
    "coefficient_axiom_check",
    "char_roots",
    "root_bound_fit",
    "mollify_root",
    "mollify_root_derivative",
    "root_estimate_check",
    "build_first_order",
    "build_diagonalizer",
    "diagonalizer_sweep",
]


# -- model problems ---------------------------------------------------------

def oscillating_factor(q: float):
    """f(t) = 1 + t sin(t^-q): continuous on [0, T], f' ~ t^-q as t -> 0."""

    def f(t):
        t = np.asarray(t, dtype=float)
        safe = np.maximum(t, 1e-12)
        with np.errstate(over="ignore", invalid="ignore"):
            osc = np.sin(safe**-q)
        return np.where(t > 0, 1.0 + t * np.nan_to_num(osc), 1.0)

    return f


def oscillating_factor_derivative(q: float):
    """f'(t) = sin(t^-q) - q t^-q cos(t^-q), defined for t > 0."""

    def df(t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("derivative sampler needs t > 0")
        return np.sin(t**-q) - q * t**-q * np.cos(t**-q)

    return df


@dataclass
class HyperbolicProblem:
    """Order-m model with real, simple, Phi-comparable characteristic roots.

    Two concrete families:
    * m = 2 coefficient form u_tt = a(t, x) u_xx with samplers a, da_dt;
    * synthetic static form with roots c_j Phi(x) xi for distinct speeds c_j.
    """

    m: int
    pm: PhaseMetric
    q: float
    sigma: float
    T: float
    delta0: float
    a: Optional[Callable] = None
    da_dt: Optional[Callable] = None
    speeds: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("order m must be >= 2")
        if self.delta0 <= 0:
            raise ValueError("hyperbolicity floor delta0 must be positive")
        if (self.a is None) == (self.speeds is None):
            raise ValueError("provide exactly one of a(t,x) or speeds")
        if self.a is not None and self.m != 2:
            raise ValueError("the coefficient form a(t,x) is second-order only")
        if self.speeds is not None:
            if len(self.speeds) != self.m:
                raise ValueError("need m speeds")
            if len(set(self.speeds)) != self.m:
                raise ValueError("speeds must be distinct (strict hyperbolicity)")

    @classmethod
    def oscillatory_example(cls, kappa: float = 0.5, q: float = 4.0 / 3.0,
                            sigma: float = 3.0, T: float = 1.0, k: float = 1.0,
                            delta0: float = 0.5) -> "HyperbolicProblem":
        """u_tt = <x>^(2 kappa) (2 + sin <x>^(1-kappa)) f(t) u_xx."""
        f = oscillating_factor(q)
        df = oscillating_factor_derivative(q)

        def profile(x):
            bx = bracket(x)
            return bx ** (2.0 * kappa) * (2.0 + np.sin(bx ** (1.0 - kappa)))

        return cls(
            m=2,
            pm=PhaseMetric(BracketPower(kappa), k=k),
            q=q, sigma=sigma, T=T, delta0=delta0,
            a=lambda t, x: profile(x) * f(t),
            da_dt=lambda t, x: profile(x) * df(t),
        )

    @classmethod
    def from_speeds(cls, speeds: Sequence[float], pm: PhaseMetric,
                    q: float = 1.0, sigma: float = 3.0, T: float = 1.0,
                    delta0: float = 0.5) -> "HyperbolicProblem":
        return cls(m=len(speeds), pm=pm, q=q, sigma=sigma, T=T,
                   delta0=delta0, speeds=tuple(sorted(speeds)))

    # roots of the principal symbol in tau, ascending along axis 0
    def char_root_sampler(self, j: int) -> Callable:
        def sampler(t, x, xi):
            return self.char_roots_all(t, x, xi)[j]

        return sampler

    def char_roots_all(self, t, x, xi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.speeds is not None:
            phi = self.pm.phi(x)
            stack = np.stack([c * phi * xi for c in self.speeds])
        else:
            av = np.asarray(self.a(t, x), dtype=float)
            if np.any(av < self.delta0):
                raise ValueError("coefficient drops below the hyperbolicity floor")
            s = np.sqrt(av)
            stack = np.stack([-s * xi, s * xi])
        return np.sort(stack, axis=0)

    def root_time_derivative_all(self, t, x, xi) -> np.ndarray:
        if self.speeds is not None:
            shape = np.broadcast(np.asarray(x, float),
                                 np.asarray(xi, float)).shape
            return np.zeros((self.m,) + shape)
        av = np.asarray(self.a(t, x), dtype=float)
        dav = np.asarray(self.da_dt(t, x), dtype=float)
        xi = np.asarray(xi, dtype=float)
        d = dav / (2.0 * np.sqrt(av)) * xi
        stack = np.stack([-d, d])
        # match the ascending-root ordering of char_roots_all
        order = np.argsort(np.stack([-np.sqrt(av) * xi, np.sqrt(av) * xi]), axis=0)
        return np.take_along_axis(stack, order, axis=0)


def char_roots(prob: HyperbolicProblem, t, x, xi) -> np.ndarray:
    """Sorted real roots tau_1 < ... < tau_m; errors if margins collapse."""
    roots = prob.char_roots_all(t, x, xi)
    margins = np.diff(roots, axis=0)
    if np.any(np.abs(np.asarray(xi)) > 0) and np.any(margins <= 0):
        raise ValueError("characteristic roots not simple (margin <= 0)")
    return roots


def root_bound_fit(prob: HyperbolicProblem, ts, xs, xis) -> dict:
    """Uniform C with |tau_j| >= C Phi(x)<xi> on |xi| >= 1, plus the t-profile."""
    xs = np.asarray(xs, dtype=float)
    xis = np.asarray(xis, dtype=float)
    mask = np.abs(xis) >= 1.0
    if not mask.any():
        raise ValueError("need sample frequencies with |xi| >= 1")
    weight = prob.pm.phi(xs)[:, None] * bracket(xis[None, mask])
    profile = []
    for t in np.atleast_1d(ts):
        roots = prob.char_roots_all(t, xs[:, None], xis[None, mask])
        quot = np.abs(roots) / weight
        profile.append(float(quot.min()))
    return {"C": float(min(profile)), "t_profile": profile}


# -- coefficient axioms -----------------------------------------------------

def coefficient_axiom_check(prob: HyperbolicProblem, max_beta: int = 2,
                            x_grid: Optional[np.ndarray] = None,
                            t_grid: Optional[np.ndarray] = None,
                            t_min_sweep: Sequence[float] = (1e-2, 1e-4, 1e-6),
                            growth_tol: float = 2.0) -> dict:
    """Growth and t-singularity bounds on the m = 2 coefficient.

    Checks sup |D_x^beta a| / Phi^(2-beta) and sup t^q |D_x^beta da/dt| /
    Phi^(2-beta) over the sample grid, for beta <= max_beta, with a
    t_min -> 0 sweep: the singular quotient must stay bounded as the time
    floor shrinks (failure mode: coefficients more singular than t^-q).
    """
    if prob.a is None:
        raise ValueError("axiom check applies to the coefficient form")
    if x_grid is None:
        x_grid = np.linspace(-32.0, 32.0, 257)
    if t_grid is None:
        t_grid = np.linspace(0.05, prob.T, 40)
    dx = x_grid[1] - x_grid[0]
    phi = prob.pm.phi(x_grid)

    from .grids import fd_derivative, FD_MARGIN
    inner = slice(FD_MARGIN, len(x_grid) - FD_MARGIN)

    growth_constants = {}
    singular_constants = {}
    for beta in range(max_beta + 1):
        sup_g = 0.0
        sup_s = 0.0
        for t in t_grid:
            av = np.asarray(prob.a(t, x_grid), dtype=float)
            dav = np.asarray(prob.da_dt(t, x_grid), dtype=float)
            if beta:
                av = fd_derivative(av, beta, dx)
                dav = fd_derivative(dav, beta, dx)
            w = phi ** (2.0 - beta)
            sup_g = max(sup_g, float(np.max(np.abs(av[inner]) / w[inner])))
            sup_s = max(sup_s, float(
                t**prob.q * np.max(np.abs(dav[inner]) / w[inner])))
        norm = math.factorial(beta) ** prob.sigma
        growth_constants[beta] = sup_g / norm
        singular_constants[beta] = sup_s / norm

    # t_min -> 0 sweep on the undifferentiated singular quotient
    sweep = []
    for t_min in t_min_sweep:
        ts = np.geomspace(t_min, min(10 * t_min, prob.T), 64)
        sup_s = 0.0
        for t in ts:
            dav = np.asarray(prob.da_dt(t, x_grid), dtype=float)
            sup_s = max(sup_s, float(
                t**prob.q * np.max(np.abs(dav) / phi**2)))
        sweep.append(sup_s)
    growing = bool(sweep[-1] > growth_tol * sweep[0])
    gevrey_C = max(
        max((c ** (1.0 / b) for b, c in growth_constants.items() if b > 0),
            default=0.0), 1.0)
    return {
        "growth_constants": growth_constants,
        "singular_constants": singular_constants,
        "t_min_sweep": sweep,
        "gevrey_C": gevrey_C,
        "passed": bool(not growing and np.isfinite(list(growth_constants.values())).all()),
    }


# -- mollification ----------------------------------------------------------

class Mollifier:
    """Smooth bump on (-2, 0), symmetric about s = -1, with unit mass.

    The profile is exp(-1/(4u(1-u))) on the unit interval, scaled so that
    0 <= rho <= 1 holds pointwise; symmetry makes the first moment
    mu1 = -Int s rho(s) ds equal to 1 exactly.  Quadrature: 64-point
    Gauss-Legendre on the support.
    """

    def __init__(self, n_quad: int = 64):
        nodes, weights = np.polynomial.legendre.leggauss(n_quad)
        # map [-1, 1] -> (-2, 0)
        self.s = nodes - 1.0
        self.w = weights.copy()
        raw = self._raw(self.s)
        mass = float(np.sum(self.w * raw))
        self._scale = 1.0 / mass
        self.peak = float(self._scale * np.exp(-1.0))
        self.mu1 = float(-np.sum(self.w * self.s * self.density(self.s)))

    @staticmethod
    def _raw(s):
        s = np.asarray(s, dtype=float)
        u = (s + 2.0) / 2.0
        inside = (u > 0) & (u < 1)
        safe = np.where(inside, u * (1.0 - u), 0.25)
        return np.where(inside, np.exp(-1.0 / (4.0 * safe)), 0.0)

    def density(self, s):
        return self._scale * self._raw(s)

    def average(self, f: Callable) -> np.ndarray:
        """Int f(s) rho(s) ds over the support by the stored quadrature."""
        acc = None
        for s_i, w_i in zip(self.s, self.w):
            term = w_i * self.density(s_i) * np.asarray(f(s_i))
            acc = term if acc is None else acc + term
        return acc


def mollify_root(tau: Callable, pm: PhaseMetric, rho: Mollifier,
                 t: float, x, xi, T: float) -> np.ndarray:
    """lambda(t,x,xi) = Int tau(t - h(x,xi) s, x, xi) rho(s) ds.

    The root is frozen at its T-value for look-ahead times beyond T.
    """
    h = planck(pm, x, xi)

    def probe(s):
        targ = np.minimum(t - h * s, T)
        return tau(targ, x, xi)

    return rho.average(probe)


def mollify_root_derivative(tau_t: Callable, pm: PhaseMetric, rho: Mollifier,
                            t: float, x, xi, T: float) -> np.ndarray:
    """d lambda/dt by averaging tau's time derivative (0 past the freeze)."""
    h = planck(pm, x, xi)

    def probe(s):
        targ = t - h * s
        live = targ <= T
        safe = np.minimum(targ, T)
        return np.where(live, tau_t(np.maximum(safe, 1e-300), x, xi), 0.0)

    return rho.average(probe)


def root_estimate_check(prob: HyperbolicProblem, zp: ZoneParams, grid: Grid1D,
                        rho: Optional[Mollifier] = None,
                        t_samples: Optional[Sequence[float]] = None) -> dict:
    """Zone-wise bounds on the mollified roots over the sample lattice.

    Reports sup over the exterior zone of t^q |lambda - tau| (should be a
    bounded constant) and of t^q |d lambda/dt| / (Phi <xi>_k), plus the
    global per-time profile of |lambda - tau| / (Phi <xi>_k).
    """
    if rho is None:
        rho = Mollifier()
    if t_samples is None:
        t_samples = np.linspace(0.05, prob.T, 12)
    pm = prob.pm
    X = grid.x[:, None]
    XI = grid.xi[None, :]
    weight = pm.phi(grid.x)[:, None] * pm.bracket_xi(grid.xi)[None, :]
    thresholds = (zp.N / weight) ** (1.0 / zp.q)
    core = np.abs(X) + np.abs(XI) <= zp.N

    sup_gap = 0.0
    sup_rate = 0.0
    gap_profile = []
    for t in t_samples:
        exterior = (~core) & (t >= thresholds)
        lam = np.stack([
            mollify_root(prob.char_root_sampler(j), pm, rho, t, X, XI, prob.T)
            for j in range(prob.m)
        ])
        tau = prob.char_roots_all(t, X, XI)
        gap = np.abs(lam - tau)
        gap_profile.append(float(np.max(gap / weight)))
        if exterior.any():
            sup_gap = max(sup_gap, float(t**prob.q * gap[:, exterior].max()))
            dlam = np.stack([
                mollify_root_derivative(
                    lambda tt, xx, zz, j=j: prob.root_time_derivative_all(tt, xx, zz)[j],
                    pm, rho, t, X, XI, prob.T)
                for j in range(prob.m)
            ])
            sup_rate = max(sup_rate, float(
                t**prob.q * (np.abs(dlam)[:, exterior] / weight[exterior]).max()))
    return {
        "sup_ext_gap": sup_gap,
        "sup_ext_rate": sup_rate,
        "gap_over_weight_profile": gap_profile,
        "t_samples": list(np.asarray(t_samples, dtype=float)),
    }


# -- first-order reduction --------------------------------------------------

@dataclass
class FirstOrderSystem:
    """d/dt U = (A1 - A2) U + F with A1 bidiagonal in the quantized sense."""

    m: int
    grid: Grid1D
    t: float
    root_symbols: Sequence[GridSymbol]
    a1_blocks: list
    a2_blocks: list

    def _assemble(self, blocks) -> np.ndarray:
        n = self.grid.n
        out = np.zeros((self.m * n, self.m * n), dtype=complex)
        for i in range(self.m):
            for j in range(self.m):
                if blocks[i][j] is not None:
                    out[i * n:(i + 1) * n, j * n:(j + 1) * n] = blocks[i][j]
        return out

    def a1_matrix(self) -> np.ndarray:
        return self._assemble(self.a1_blocks)

    def a2_matrix(self) -> np.ndarray:
        return self._assemble(self.a2_blocks)

    def generator(self) -> np.ndarray:
        """The full right-hand side matrix A1 - A2."""
        return self.a1_matrix() - self.a2_matrix()


def _symbol(grid, values, order=(0.0, 0.0)) -> GridSymbol:
    return GridSymbol(grid, np.asarray(values, dtype=complex), order)


def _sandwich(outer: GridSymbol, mid: GridSymbol, outer_inv: GridSymbol,
              J: int = 3) -> GridSymbol:
    left = compose_asymptotic(outer, mid, J).symbol
    return compose_asymptotic(left, outer_inv, J).symbol


def build_first_order(prob: HyperbolicProblem, grid: Grid1D, t: float,
                      rho: Optional[Mollifier] = None, J: int = 3) -> FirstOrderSystem:
    """Reduce the order-m scalar problem to the bidiagonal first-order system.

    A1 carries i lambda_j on the diagonal and Phi<D>_k on the superdiagonal.
    A2 rows 0..m-2 are the order-zero commutator corrections from moving the
    weights past the roots; the last row carries the factorization remainder
    (computed by J-term composition expansion).  For m > 2 only static-root
    problems are supported (their factorization remainder vanishes).
    """
    if rho is None:
        rho = Mollifier()
    pm = prob.pm
    m = prob.m
    X, XI = grid.x[:, None], grid.xi[None, :]
    w_vals = pm.phi(grid.x)[:, None] * pm.bracket_xi(grid.xi)[None, :]

    lam = [
        _symbol(grid, mollify_root(prob.char_root_sampler(j), pm, rho,
                                   t, X, XI, prob.T), order=(1.0, 1.0))
        for j in range(m)
    ]
    w_sym = _symbol(grid, w_vals, order=(1.0, 1.0))

    a1 = [[None] * m for _ in range(m)]
    a2 = [[None] * m for _ in range(m)]
    for j in range(m):
        a1[j][j] = 1j * quantize(lam[j]).matrix
        if j + 1 < m:
            a1[j][j + 1] = quantize(w_sym).matrix

    # rows 0..m-2: weight/root commutator corrections of order zero
    for j in range(m - 1):
        p = m - 1 - j
        wp = _symbol(grid, w_vals ** p, order=(float(p), float(p)))
        wp_inv = _symbol(grid, w_vals ** (-p), order=(-float(p), -float(p)))
        s_j = _sandwich(wp, lam[j], wp_inv, J)
        corr = 1j * (quantize(s_j).matrix - quantize(lam[j]).matrix)
        a2[j][j] = -corr

    # last row: factorization remainder
    if m == 2:
        dlam0 = mollify_root_derivative(
            lambda tt, xx, zz: prob.root_time_derivative_all(tt, xx, zz)[0],
            pm, rho, t, X, XI, prob.T)
        comp = compose_asymptotic(lam[1], lam[0], J).symbol.values
        taus = prob.char_roots_all(t, X, XI)
        r0 = comp - taus[0] * taus[1] + 1j * dlam0
        r1 = 1j * (lam[0].values + lam[1].values)
        w_inv = _symbol(grid, 1.0 / w_vals, order=(-1.0, -1.0))
        row_sym = _symbol(grid, r0 + 1j * r1 * lam[0].values, order=(1.0, 1.0))
        a2[1][0] = compose_asymptotic(row_sym, w_inv, J).symbol.values
        a2[1][0] = quantize(_symbol(grid, a2[1][0])).matrix
        a2[1][1] = quantize(_symbol(grid, r1)).matrix
    else:
        if prob.speeds is None:
            raise NotImplementedError(
                "time-dependent coefficients supported at m = 2 only")
        # static roots: exact factorization, remainder row vanishes

    return FirstOrderSystem(m=m, grid=grid, t=t, root_symbols=lam,
                            a1_blocks=a1, a2_blocks=a2)


# -- diagonalizer -----------------------------------------------------------

@dataclass
class DiagonalizerResult:
    M: float
    T_sym: np.ndarray          # (m, m, nx, nxi)
    H_sym: np.ndarray
    H_tilde_sym: np.ndarray
    nilpotency_defect: float
    symbol_identity_defect: float
    K: np.ndarray              # dense (m n) x (m n)
    K_norm: float
    order_fit: dict


def _pointwise_matmul(A, B):
    return np.einsum("ip...,pj...->ij...", A, B)


def build_diagonalizer(roots: np.ndarray, pm: PhaseMetric, grid: Grid1D,
                       M: float, fit_xi0s: Optional[Sequence[float]] = None,
                       fit_x0: float = 3.0) -> DiagonalizerResult:
    """H = I + T with T from the cutoff root-difference quotients.

    ``roots`` has shape (m, nx, nxi), ascending.  T is strictly upper
    triangular, hence T^m = 0 pointwise and H (I + sum (-1)^j T^j) = I is an
    exact symbol identity.  K is the operator-level defect
    quantize(H) quantize(H~) - I, with a wave-packet order fit: K is applied
    to packets of fixed width <xi0>^(-1/2) placed in each component slot and
    log ||K psi|| is regressed against log <xi0>.  Components on which K
    vanishes to round-off get slope None.
    """
    m = roots.shape[0]
    w_vals = pm.phi(grid.x)[:, None] * pm.bracket_xi(grid.xi)[None, :]
    cutoff = 1.0 - smooth_step((w_vals - M) / M)   # phi_1: 1 inside, 0 for w >= 2M
    active = 1.0 - cutoff
    n = grid.n

    T_sym = np.zeros((m, m, n, n), dtype=complex)
    for p in range(m):
        for q_idx in range(p + 1, m):
            d = np.ones((n, n), dtype=complex)
            for r in range(p + 1, q_idx + 1):
                d = d * (1j * (roots[q_idx] - roots[r - 1]))
            with np.errstate(divide="ignore", invalid="ignore"):
                beta = np.where(active > 0,
                                active * w_vals ** (q_idx - p) / d, 0.0)
            T_sym[p, q_idx] = beta

    eye = np.zeros_like(T_sym)
    for i in range(m):
        eye[i, i] = 1.0
    # nilpotency: T^m = 0 exactly
    power = T_sym
    for _ in range(m - 1):
        power = _pointwise_matmul(power, T_sym)
    nilpotency_defect = float(np.abs(power).max())

    H_sym = eye + T_sym
    H_tilde_sym = eye.copy()
    term = eye
    for j in range(1, m):
        term = _pointwise_matmul(term, -T_sym)
        H_tilde_sym = H_tilde_sym + term
    identity_defect = float(
        np.abs(_pointwise_matmul(H_sym, H_tilde_sym) - eye).max())

    def block_quantize(sym):
        out = np.zeros((m * n, m * n), dtype=complex)
        for i in range(m):
            for j in range(m):
                if i == j or np.abs(sym[i, j]).max() > 0:
                    out[i * n:(i + 1) * n, j * n:(j + 1) * n] = \
                        quantize(_symbol(grid, sym[i, j])).matrix
        return out

    h_op = block_quantize(H_sym)
    ht_op = block_quantize(H_tilde_sym)
    K = h_op @ ht_op - np.eye(m * n)
    k_norm = operator_norm(K)

    # behavioral order fit per component slot; packets keep a fixed width
    # <xi0>^(-1/2) so their frequency spread stays well inside the grid band
    xi_max = np.abs(grid.xi).max()

    def fits(xi0):
        return xi0 + 4.0 * math.sqrt(math.sqrt(1.0 + xi0**2)) <= xi_max

    if fit_xi0s is None:
        fit_xi0s = [v for v in (24.0, 32.0, 48.0, 64.0) if fits(v)]
        if len(fit_xi0s) < 3:
            fit_xi0s = [xi_max * f for f in (0.25, 0.4, 0.6)]
    elif not fits(max(fit_xi0s)):
        raise ValueError("fit packets exceed the resolvable frequency band; "
                         "refine the grid or lower fit_xi0s")
    slopes = []
    norms_by_comp = []
    for comp in range(m):
        norms = []
        for xi0 in fit_xi0s:
            width = 1.0 / math.sqrt(math.sqrt(1.0 + xi0**2))
            psi = wave_packet(grid, fit_x0, xi0, width)
            vec = np.zeros(m * n, dtype=complex)
            vec[comp * n:(comp + 1) * n] = psi
            norms.append(l2_norm(K @ vec, grid.dx))
        norms_by_comp.append([float(v) for v in norms])
        if max(norms) <= 1e-12:
            slopes.append(None)   # K annihilates this component slot
        else:
            slopes.append(float(log_log_slope(
                pm.bracket_xi(np.asarray(fit_xi0s)), np.asarray(norms))))

    return DiagonalizerResult(
        M=M, T_sym=T_sym, H_sym=H_sym, H_tilde_sym=H_tilde_sym,
        nilpotency_defect=nilpotency_defect,
        symbol_identity_defect=identity_defect,
        K=K, K_norm=float(k_norm),
        order_fit={"slopes": slopes, "norms": norms_by_comp,
                   "xi0s": list(fit_xi0s), "x0": fit_x0},
    )


def diagonalizer_sweep(roots: np.ndarray, pm: PhaseMetric, grid: Grid1D,
                       Ms: Sequence[float] = (4.0, 8.0, 16.0)) -> dict:
    """||K|| across cutoff levels M; picks the first M with ||K|| < 1."""
    norms = []
    results = {}
    for M in Ms:
        res = build_diagonalizer(roots, pm, grid, M)
        norms.append(res.K_norm)
        results[M] = res
    chosen = next((M for M, nn in zip(Ms, norms) if nn < 1.0), None)
    if chosen is None:
        raise ValueError("no swept cutoff makes the diagonalizer defect contractive")
    return {"Ms": list(Ms), "norms": norms, "chosen_M": chosen,
            "result": results[chosen]}
