"""Spatial weight functions, their axiom battery, and the weight lattice.

A weight is a function Phi with 1 <= Phi(x) <= C(1+|x|), even, monotone in
|x|, slowly varying, temperate, subadditive, with |Phi'| controlled by
Phi/<x> and two scaling comparisons.  The axiom battery fits the defining
constants on symmetric grids and checks their stability under refinement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "WeightFunction",
    "Constant",
    "BracketPower",
    "TabulatedEnvelope",
    "AxiomReport",
    "MetricForm",
    "check_weight_axioms",
    "weight_join",
    "weight_meet",
    "optimal_phi",
    "metric_order_check",
    "weight_to_json",
    "weight_from_json",
    "default_axiom_grid",
]

AXIOM_NAMES = ("sl", "sv", "tp", "sa", "deriv", "scale-up", "scale-down")


def bracket(x):
    """Japanese bracket <x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


class WeightFunction:
    """Base class: evaluation plus derivative access."""

    kind = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, x, order: int = 1):
        raise NotImplementedError


class Constant(WeightFunction):
    kind = "constant"

    def __init__(self, c: float):
        if c < 1:
            raise ValueError("constant weight must be >= 1")
        self.c = float(c)

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def deriv(self, x, order: int = 1):
        return np.zeros_like(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"Constant({self.c})"


class BracketPower(WeightFunction):
    """<x>^kappa for kappa in [0, 1]."""

    kind = "bracket_power"

    def __init__(self, kappa: float):
        if not 0 <= kappa <= 1:
            raise ValueError("kappa must lie in [0, 1]")
        self.kappa = float(kappa)

    def __call__(self, x):
        return bracket(x) ** self.kappa

    def deriv(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        k = self.kappa
        b = bracket(x)
        if order == 1:
            return k * x * b ** (k - 2.0)
        if order == 2:
            return k * b ** (k - 2.0) + k * (k - 2.0) * x**2 * b ** (k - 4.0)
        raise ValueError("analytic derivatives implemented up to order 2")

    def __repr__(self):
        return f"BracketPower({self.kappa})"


class TabulatedEnvelope(WeightFunction):
    """Weight given by samples on a sorted grid, monotone cubic interpolation.

    Values are clamped below at 1.  Outside the tabulated range evaluation is
    frozen at the edge values (weights at desk scale are only ever queried
    marginally beyond their grid, by the temperance scan).
    """

    kind = "tabulated"

    def __init__(self, x_grid, values):
        x_grid = np.asarray(x_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if x_grid.ndim != 1 or np.any(np.diff(x_grid) <= 0):
            raise ValueError("x_grid must be strictly increasing")
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("tabulated weight values must be positive and finite")
        self.x_grid = x_grid
        self.values = np.maximum(values, 1.0)
        self._interp = PchipInterpolator(self.x_grid, self.values, extrapolate=False)
        self._dinterp = self._interp.derivative()

    def __call__(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.x_grid[0], self.x_grid[-1])
        return np.maximum(self._interp(x), 1.0)

    def deriv(self, x, order: int = 1):
        x = np.clip(np.asarray(x, dtype=float), self.x_grid[0], self.x_grid[-1])
        if order == 1:
            return self._dinterp(x)
        if order == 2:
            return self._interp.derivative(2)(x)
        raise ValueError("envelope derivatives implemented up to order 2")

    def __repr__(self):
        return f"TabulatedEnvelope(n={len(self.x_grid)})"


# -- serialization --------------------------------------------------------

def weight_to_json(w: WeightFunction) -> str:
    if isinstance(w, Constant):
        obj = {"kind": w.kind, "parameters": {"c": w.c}}
    elif isinstance(w, BracketPower):
        obj = {"kind": w.kind, "parameters": {"kappa": w.kappa}}
    elif isinstance(w, TabulatedEnvelope):
        obj = {
            "kind": w.kind,
            "parameters": {},
            "grid": {"x": w.x_grid.tolist(), "values": w.values.tolist()},
        }
    else:
        raise TypeError(f"unknown weight {w!r}")
    return json.dumps(obj)


def weight_from_json(text: str) -> WeightFunction:
    obj = json.loads(text)
    kind = obj["kind"]
    if kind == "constant":
        return Constant(obj["parameters"]["c"])
    if kind == "bracket_power":
        return BracketPower(obj["parameters"]["kappa"])
    if kind == "tabulated":
        return TabulatedEnvelope(obj["grid"]["x"], obj["grid"]["values"])
    raise ValueError(f"unknown weight kind {kind!r}")


# -- axiom battery --------------------------------------------------------

@dataclass
class AxiomEntry:
    name: str
    constant: float
    worst_pair: tuple
    passed: bool
    drift: float = 0.0


@dataclass
class AxiomReport:
    entries: dict = field(default_factory=dict)
    temperance_exponent: float = 0.0

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "passed": self.passed,
                "temperance_exponent": self.temperance_exponent,
                "axioms": {
                    n: {
                        "constant": e.constant,
                        "worst_pair": list(e.worst_pair),
                        "passed": e.passed,
                        "drift": e.drift,
                    }
                    for n, e in self.entries.items()
                },
            },
            indent=2,
            sort_keys=True,
        )


def default_axiom_grid(n: int = 513, extent: float = 64.0) -> np.ndarray:
    return np.linspace(-extent, extent, n)


def _axiom_constants(w: WeightFunction, xg: np.ndarray, yg: np.ndarray):
    """Fitted constants (suprema of the defining quotients) on one grid pair."""
    phi_x = w(xg)
    if np.any(phi_x < 1.0 - 1e-12):
        raise ValueError("weight dips below 1 on the grid")

    out = {}

    # sub-linear: Phi(x) <= C (1 + |x|)
    quot = phi_x / (1.0 + np.abs(xg))
    i = int(np.argmax(quot))
    out["sl"] = (float(quot[i]), (float(xg[i]), 0.0))

    # slowly varying, implication form with r = 1/2:
    # |x - y| <= Phi(y)/2  =>  C^-1 Phi(y) <= Phi(x) <= C Phi(y)
    phi_y = w(yg)
    X, Y = np.meshgrid(xg, yg, indexing="ij")
    admissible = np.abs(X - Y) <= 0.5 * phi_y[None, :]
    ratio = phi_x[:, None] / phi_y[None, :]
    ratio = np.maximum(ratio, 1.0 / ratio)
    ratio = np.where(admissible, ratio, 0.0)
    i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
    out["sv"] = (float(ratio[i, j]), (float(xg[i]), float(yg[j])))

    # temperate: Phi(x+y) <= C (1+|y|)^s Phi(x); fit s on |y|>=1, C on |y|<1
    phi_xy = w(X + Y)
    growth = phi_xy / phi_x[:, None]
    big = np.abs(yg) >= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        s_fit = np.log(np.maximum(growth[:, big], 1.0)) / np.log1p(np.abs(yg[big]))[None, :]
    s = float(np.max(s_fit)) if s_fit.size else 0.0
    small = ~big
    c_tp = float(np.max(growth[:, small])) if small.any() else 1.0
    i, j = np.unravel_index(np.argmax(growth), growth.shape)
    out["tp"] = (max(c_tp, 1.0), (float(xg[i]), float(yg[j])), s)

    # subadditive: Phi(x+y) <= Phi(x) + Phi(y)
    quot2 = phi_xy / (phi_x[:, None] + phi_y[None, :])
    i, j = np.unravel_index(np.argmax(quot2), quot2.shape)
    out["sa"] = (float(quot2[i, j]), (float(xg[i]), float(yg[j])))

    # derivative bound: |Phi'(x)| <= C Phi(x) <x>^-1
    dq = np.abs(w.deriv(xg, 1)) * bracket(xg) / phi_x
    i = int(np.argmax(dq))
    out["deriv"] = (float(dq[i]), (float(xg[i]), 0.0))

    # scale-up: Phi(a x) <= a Phi(x) for a > 1
    best, pair = 0.0, (0.0, 0.0)
    for a in (2.0, 4.0, 8.0):
        q = w(a * xg) / (a * phi_x)
        i = int(np.argmax(q))
        if q[i] > best:
            best, pair = float(q[i]), (float(xg[i]), a)
    out["scale-up"] = (best, pair)

    # scale-down: a Phi(x) <= Phi(a x) for 0 < a <= 1
    best, pair = 0.0, (0.0, 0.0)
    for a in (0.5, 0.25, 0.125):
        q = a * phi_x / w(a * xg)
        i = int(np.argmax(q))
        if q[i] > best:
            best, pair = float(q[i]), (float(xg[i]), a)
    out["scale-down"] = (best, pair)

    return out


def check_weight_axioms(
    w: WeightFunction,
    x_grid: Optional[np.ndarray] = None,
    y_grid: Optional[np.ndarray] = None,
    tol: float = 1e-9,
) -> AxiomReport:
    """Evaluate the seven weight axioms as fitted suprema with refinement check.

    Grids must be symmetric and cover at least [-64, 64]; the default is 513
    symmetric points.  An axiom passes when its constant is finite, the
    pointwise comparisons with exact constant 1 (sa, scale) hold up to ``tol``,
    and the fitted constant moves by no more than 10% when grid density
    doubles.
    """
    if x_grid is None:
        x_grid = default_axiom_grid()
    if y_grid is None:
        y_grid = x_grid
    for g in (x_grid, y_grid):
        if -g.min() != g.max() or g.max() < 64.0:
            raise ValueError("axiom grids must be symmetric and cover [-64, 64]")

    coarse = _axiom_constants(w, x_grid, y_grid)
    fine_x = np.linspace(x_grid[0], x_grid[-1], 2 * len(x_grid) - 1)
    fine_y = np.linspace(y_grid[0], y_grid[-1], 2 * len(y_grid) - 1)
    fine = _axiom_constants(w, fine_x, fine_y)

    report = AxiomReport()
    report.temperance_exponent = fine["tp"][2]
    for name in AXIOM_NAMES:
        c0, c1 = coarse[name][0], fine[name][0]
        drift = abs(c1 - c0) / max(c0, 1e-300) if c0 > 0 else 0.0
        stable = drift <= 0.10 or max(c0, c1) <= 1.0 + tol
        if name in ("sa", "scale-up", "scale-down"):
            ok = c1 <= 1.0 + tol and stable
        else:
            ok = np.isfinite(c1) and stable
        report.entries[name] = AxiomEntry(
            name=name, constant=c1, worst_pair=fine[name][1], passed=bool(ok), drift=drift
        )
    return report


# -- lattice --------------------------------------------------------------

def _union_grid(w1: WeightFunction, w2: WeightFunction) -> np.ndarray:
    grids = []
    for w in (w1, w2):
        if isinstance(w, TabulatedEnvelope):
            grids.append(w.x_grid)
    if not grids:
        return default_axiom_grid()
    g = np.unique(np.concatenate(grids + [default_axiom_grid()]))
    return g


def weight_join(w1: WeightFunction, w2: WeightFunction) -> TabulatedEnvelope:
    """Pointwise max, sampled into an envelope (join of the weight lattice)."""
    g = _union_grid(w1, w2)
    return TabulatedEnvelope(g, np.maximum(w1(g), w2(g)))


def weight_meet(w1: WeightFunction, w2: WeightFunction) -> TabulatedEnvelope:
    """Pointwise min, sampled into an envelope (meet of the weight lattice)."""
    g = _union_grid(w1, w2)
    return TabulatedEnvelope(g, np.minimum(w1(g), w2(g)))


# -- optimal weight from a coefficient ------------------------------------

def optimal_phi(a_sampler, delta0: float, t_grid, x_grid) -> TabulatedEnvelope:
    """Envelope Phi(x) = inf_t sqrt(a(t,x)/delta0), clamped at 1.

    Requires a >= delta0 on the whole grid (strict hyperbolicity floor).  The
    returned envelope carries ``sandwich_constant`` C such that
    C^-1 Phi^2 <= a <= C Phi^2 holds on the input grid.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    a = np.asarray([a_sampler(t, x_grid) for t in t_grid], dtype=float)
    if np.any(a < delta0 * (1 - 1e-12)):
        t_i, x_i = np.unravel_index(np.argmin(a), a.shape)
        raise ValueError(
            f"hyperbolicity violation: a({t_grid[t_i]}, {x_grid[x_i]}) = "
            f"{a[t_i, x_i]} < delta0 = {delta0}"
        )
    vals = np.maximum(np.sqrt(a.min(axis=0) / delta0), 1.0)
    phi = TabulatedEnvelope(x_grid, vals)
    p2 = phi(x_grid) ** 2
    phi.sandwich_constant = float(max(np.max(a / p2[None, :]), np.max(p2[None, :] / a)))
    return phi


# -- induced metric forms and order reversal ------------------------------

@dataclass
class MetricForm:
    """Block-diagonal positive form with blocks Phi(x)^-2 and <xi>_k^-2."""

    phi: WeightFunction
    k: float = 1.0

    def __call__(self, x, xi, yx, yxi):
        br = np.sqrt(self.k**2 + np.asarray(xi, dtype=float) ** 2)
        return self.phi(x) ** (-2.0) * yx**2 + br ** (-2.0) * yxi**2


def metric_order_check(w1: WeightFunction, w2: WeightFunction, grid=None) -> dict:
    """Compare Phi1 <~ Phi2 on the grid and verify the induced-form reversal.

    Boundedness of Phi1/Phi2 is judged by edge growth: the supremum over the
    full grid must not exceed the supremum over the inner half by more than
    10%.  Reversal means Q_{Phi2}(Y) <= max(c^2,1) Q_{Phi1}(Y) on sampled Y.
    """
    if grid is None:
        grid = default_axiom_grid()
    quot = w1(grid) / w2(grid)
    inner = np.abs(grid) <= 0.5 * np.abs(grid).max()
    c_full, c_inner = float(np.max(quot)), float(np.max(quot[inner]))
    bounded = c_full <= 1.10 * c_inner
    result = {"w1_less_w2": bool(bounded), "c": c_full, "reversal": False}
    if bounded:
        q1 = MetricForm(w1)
        q2 = MetricForm(w2)
        rng = np.random.default_rng(0)
        xs = rng.choice(grid, size=64)
        ys = rng.standard_normal((64, 2))
        bound = max(c_full**2, 1.0)
        ok = True
        for x, (yx, yxi) in zip(xs, ys):
            if q2(x, 0.0, yx, yxi) > bound * q1(x, 0.0, yx, yxi) * (1 + 1e-9):
                ok = False
                break
        result["reversal"] = ok
    return result
