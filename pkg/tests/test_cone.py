import math

import numpy as np
import pytest
from scipy.integrate import quad

from phasecalc.calculus import quantize
from phasecalc.cone import (
    Cone,
    cone_condition_check,
    cone_speed,
    eq_modulus,
    support_interval,
)
from phasecalc.grids import Grid1D
from phasecalc.hyperbolic import HyperbolicProblem
from phasecalc.phase_metric import PhaseMetric
from phasecalc.solver import time_step_solve
from phasecalc.symbols import sample_symbol
from phasecalc.weights import BracketPower, Constant


@pytest.fixture(scope="module")
def grid():
    return Grid1D(16.0, 256)


def _wave_system(grid, speed_sq):
    # [u, v] with u' = v, v' = speed_sq(x) u_xx
    n = grid.n
    d2 = quantize(sample_symbol(lambda x, xi: -(xi**2) + 0.0 * x, grid,
                                (2.0, 0.0))).matrix
    A = np.zeros((2 * n, 2 * n), complex)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = np.asarray(speed_sq)[:, None] * d2
    return A


def _run(grid, A, u0, T, dt=5e-4, n_slices=9):
    W0 = np.concatenate([u0, np.zeros(grid.n)])
    traj = time_step_solve(A, W0, None, dt, (0.0, T), grid)
    idxs = [int(round(t / dt)) for t in np.linspace(0.0, T, n_slices)]
    return ([traj.ts[i] for i in idxs],
            [traj.states[i][:grid.n] for i in idxs])


class TestCone:
    def test_validation(self):
        with pytest.raises(ValueError):
            Cone(0.0, 1.0, 0.0, Constant(1.0))
        with pytest.raises(ValueError):
            Cone(0.0, -1.0, 1.0, Constant(1.0))

    def test_slices_shrink_toward_vertex(self, grid):
        cone = Cone(0.0, 1.0, 2.0, BracketPower(0.5))
        counts = [np.count_nonzero(cone.slice_mask(grid, t))
                  for t in (0.0, 0.3, 0.6, 0.9)]
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_slice_time_domain(self, grid):
        cone = Cone(0.0, 1.0, 1.0, Constant(1.0))
        with pytest.raises(ValueError):
            cone.slice_mask(grid, 1.5)


class TestConeSpeed:
    def test_static_weight_proportional_coefficient(self, grid):
        # a = c0^2 Phi(x)^2 gives roots +-c0 Phi xi, hence speed exactly c0
        pm = PhaseMetric(BracketPower(0.5), k=1.0)
        phi = pm.phi
        prob = HyperbolicProblem(
            m=2, pm=pm, q=1.0, sigma=3.0, T=1.0, delta0=0.5,
            a=lambda t, x: 4.0 * phi(x) ** 2,
            da_dt=lambda t, x: 0.0 * x)
        assert cone_speed(prob, grid) == pytest.approx(2.0, rel=1e-12)

    def test_monotone_under_domination(self, grid):
        pm = PhaseMetric(Constant(1.0), k=1.0)
        mk = lambda amp: HyperbolicProblem(
            m=2, pm=pm, q=1.0, sigma=3.0, T=1.0, delta0=0.5,
            a=lambda t, x: amp + 0.5 * np.cos(x) ** 2,
            da_dt=lambda t, x: 0.0 * x)
        assert cone_speed(mk(1.0), grid) <= cone_speed(mk(2.0), grid)

    def test_oscillatory_example_bounded(self, grid):
        prob = HyperbolicProblem.oscillatory_example()
        c = cone_speed(prob, grid)
        assert 1.0 < c <= math.sqrt(6.0)


class TestSupportInterval:
    def test_zero_function(self, grid):
        assert support_interval(np.zeros(grid.n), grid) is None

    def test_gaussian_edges(self, grid):
        sig = 0.3
        u = np.exp(-0.5 * ((grid.x - 2.0) / sig) ** 2)
        lo, hi = support_interval(u, grid)
        edge = sig * math.sqrt(2.0 * math.log(1e8))
        assert lo == pytest.approx(2.0 - edge, abs=grid.dx)
        assert hi == pytest.approx(2.0 + edge, abs=grid.dx)


class TestConeCondition:
    def test_zero_solution_passes(self, grid):
        cone = Cone(0.0, 1.0, 1.0, Constant(1.0))
        rep = cone_condition_check([0.0, 0.5], [np.zeros(grid.n)] * 2, grid,
                                   cone)
        assert rep["passed"]
        assert all(m == float("inf") for m in rep["margins_cells"])

    def test_grid_mismatch(self, grid):
        cone = Cone(0.0, 1.0, 1.0, Constant(1.0))
        with pytest.raises(ValueError):
            cone_condition_check([0.0], [np.zeros(grid.n // 2)], grid, cone)

    def test_dalembert_oracle_and_both_outcomes(self, grid):
        A = _wave_system(grid, np.ones(grid.n))
        sig = 0.3
        u0 = np.exp(-0.5 * ((grid.x - 3.0) / sig) ** 2)
        ts, us = _run(grid, A, u0, T=1.0)
        # support transport: edges move outward at speed 1, within 1 cell
        lo0, hi0 = support_interval(us[0], grid)
        loT, hiT = support_interval(us[-1], grid)
        assert loT == pytest.approx(lo0 - 1.0, abs=grid.dx)
        assert hiT == pytest.approx(hi0 + 1.0, abs=grid.dx)
        cone = Cone(0.0, 1.0, 1.0, Constant(1.0))
        assert cone_condition_check(ts, us, grid, cone)["passed"]
        # data in the annulus between the half-speed and full cone bases
        # crosses the undersized cone
        u0b = np.exp(-0.5 * ((grid.x - 1.5) / 0.15) ** 2)
        tsb, usb = _run(grid, A, u0b, T=1.0)
        repb = cone_condition_check(tsb, usb, grid, cone.shrunk(0.5))
        assert not repb["passed"]
        assert repb["worst_violation_cells"] > 1


class TestEqModulus:
    def test_equal_eps_is_zero(self):
        assert eq_modulus(0.5, 0.3, 0.3, 1.0) == 0.0
        assert eq_modulus(0.5, 0.3, 0.3, 4.0 / 3.0) == 0.0

    def test_q1_log_value(self):
        assert eq_modulus(0.0, 2.0, 1.0, 1.0) == pytest.approx(math.log(2.0))

    def test_q43_closed_value(self):
        assert eq_modulus(0.0, 1.0, 0.125, 4.0 / 3.0) == pytest.approx(3.0)

    @pytest.mark.parametrize("q", [1.0, 1.2, 4.0 / 3.0, 1.49])
    def test_matches_integral(self, q):
        for tau, e1, e2 in [(0.0, 1.0, 0.125), (0.5, 0.7, 0.2), (2.0, 3.0, 0.0)]:
            if tau + e2 <= 0:
                continue
            val, _ = quad(lambda r: r**-q, tau + e2, tau + e1)
            assert eq_modulus(tau, e1, e2, q) == pytest.approx(val, rel=1e-10)

    def test_monotonicity(self):
        q = 4.0 / 3.0
        assert eq_modulus(0.1, 1.0, 0.2, q) < eq_modulus(0.1, 2.0, 0.2, q)
        assert eq_modulus(0.1, 1.0, 0.3, q) < eq_modulus(0.1, 1.0, 0.2, q)
        assert eq_modulus(0.5, 1.0, 0.2, q) < eq_modulus(0.1, 1.0, 0.2, q)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            eq_modulus(0.0, 0.1, 0.2, 1.0)
        with pytest.raises(ValueError):
            eq_modulus(-0.1, 0.2, 0.1, 1.0)
        with pytest.raises(ValueError):
            eq_modulus(0.0, 0.2, 0.1, 1.6)
        with pytest.raises(ValueError):
            eq_modulus(0.0, 0.2, 0.0, 1.2)
