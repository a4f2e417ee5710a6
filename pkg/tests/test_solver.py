import math

import numpy as np
import pytest

from phasecalc.calculus import quantize
from phasecalc.conjugation import lambda_profile
from phasecalc.grids import Grid1D, band_limited_probe, l2_norm, log_log_slope, wave_packet
from phasecalc.hyperbolic import HyperbolicProblem
from phasecalc.phase_metric import PhaseMetric, delta_from
from phasecalc.solver import (
    EnergyTrace,
    assemble_damping,
    cfl_timestep,
    conjugated_solve,
    garding_floor,
    gronwall_fit,
    select_lambda,
    time_step_solve,
    _damp,
)
from phasecalc.symbols import sample_symbol
from phasecalc.weights import BracketPower, Constant


@pytest.fixture(scope="module")
def grid():
    return Grid1D(8.0, 64)


@pytest.fixture(scope="module")
def transport(grid):
    # A = i Op(xi): right-moving transport, exactly solvable per mode
    p = sample_symbol(lambda x, xi: xi + 0.0 * x, grid, (1.0, 0.0))
    return 1j * quantize(p).matrix


def _exact_transport(grid, u0, t):
    xi = np.fft.ifftshift(grid.xi)
    spec = np.fft.fft(np.fft.ifftshift(u0))
    return np.fft.fftshift(np.fft.ifft(np.exp(1j * xi * t) * spec))


class TestCFL:
    def test_value(self, grid):
        assert cfl_timestep(grid, 4.0, cfl=0.5) == pytest.approx(
            0.5 * grid.dx / 4.0)

    def test_positive_speed_required(self, grid):
        with pytest.raises(ValueError):
            cfl_timestep(grid, 0.0)


class TestTimeStepSolve:
    def test_zero_data_zero_source(self, grid, transport):
        traj = time_step_solve(transport, np.zeros(grid.n, complex), None,
                               0.01, (0.0, 0.5), grid)
        assert max(traj.norms()) == 0.0

    def test_norm_conserved_constant_speed(self, grid, transport):
        u0 = wave_packet(grid, 0.0, 3.0, 1.0)
        traj = time_step_solve(transport, u0, None, 0.01, (0.0, 1.0), grid)
        norms = traj.norms()
        assert abs(norms[-1] - norms[0]) <= 1e-6

    def test_rk4_fourth_order(self, grid, transport):
        u0 = wave_packet(grid, 0.0, 3.0, 1.0)
        exact = _exact_transport(grid, u0, 0.5)
        dts = [0.05, 0.025, 0.0125, 0.00625]
        errs = [l2_norm(time_step_solve(transport, u0, None, dt, (0.0, 0.5),
                                        grid).states[-1] - exact, grid.dx)
                for dt in dts]
        assert log_log_slope(dts, errs) == pytest.approx(4.0, abs=0.1)

    def test_blowup_detected(self, grid):
        A = 10.0 * np.eye(grid.n)
        u0 = np.ones(grid.n, complex)
        with pytest.raises(RuntimeError, match="unstable"):
            time_step_solve(A, u0, None, 0.01, (0.0, 2.0), grid)


class TestDamping:
    def test_scalar_mode_oracle(self, grid):
        # flat weight: the damping operator is the Fourier multiplier
        # <xi>^(1/sigma), so a single mode decays by the closed-form factor
        pm = PhaseMetric(Constant(1.0), k=1.0)
        sigma, lam, T = 3.0, 2.0, 1.0
        delta = delta_from(sigma, 1.0)
        profile = lambda_profile(lam, delta, T)
        V, evals = assemble_damping(pm, grid, sigma)
        xi0 = grid.xi[grid.n // 2 + 6]
        mode = np.exp(1j * xi0 * grid.x)
        theta = float(profile(0.0) - profile(T))
        out = _damp(mode, V, evals, theta, 1, grid.n)
        factor = math.exp(-theta * (1.0 + xi0**2) ** (1.0 / (2 * sigma)))
        assert np.allclose(out, factor * mode, atol=1e-10)


@pytest.fixture(scope="module")
def osc_problem():
    return HyperbolicProblem.oscillatory_example()


class TestConjugatedSolve:
    def test_zero_data_zero_source(self, osc_problem):
        g = Grid1D(8.0, 64)
        traj = conjugated_solve(osc_problem, 5.0,
                                np.zeros(2 * g.n, complex), None, g)
        assert max(traj.trace.l2) == 0.0

    def test_validation(self, osc_problem):
        g = Grid1D(8.0, 64)
        with pytest.raises(ValueError):
            conjugated_solve(osc_problem, -1.0, np.zeros(2 * g.n, complex),
                             None, g)
        with pytest.raises(ValueError, match="shape"):
            conjugated_solve(osc_problem, 5.0, np.zeros(g.n, complex), None, g)

    def test_oscillatory_example_damped_energy(self, osc_problem):
        g = Grid1D(8.0, 64)
        n = g.n
        data = np.zeros(2 * n, complex)
        data[:n] = wave_packet(g, 0.0, 4.0, 1.0)
        pulse = np.exp(-((g.x - 1.0) ** 2))

        def source(t):
            v = np.zeros(2 * n, complex)
            v[n:] = pulse * math.exp(-(((t - 0.3) / 0.1) ** 2))
            return v

        traj = conjugated_solve(osc_problem, 5.0, data, source, g)
        tr = traj.trace
        assert max(tr.l2) == tr.l2[0]          # damping dominates
        assert np.isfinite(max(tr.weighted))
        assert tr.cumF[-1] > 0
        rep = gronwall_fit(tr)
        assert rep["C"] == pytest.approx(1.0, abs=1e-9)

    def test_undamped_static_speeds_bounded(self):
        pm = PhaseMetric(BracketPower(0.5), k=1.0)
        prob = HyperbolicProblem.from_speeds((-1.0, 1.0), pm)
        g = Grid1D(8.0, 64)
        data = np.zeros(2 * g.n, complex)
        data[:g.n] = wave_packet(g, 0.0, 3.0, 1.0)
        traj = conjugated_solve(prob, 0.0, data, None, g, T=0.25)
        assert np.isfinite(traj.trace.l2[-1])
        assert max(traj.trace.l2) < 10.0


class TestGardingFloor:
    def test_identity(self):
        assert garding_floor(np.eye(16)) == pytest.approx(1.0)

    def test_flat_power_multiplier_nonnegative(self, grid):
        p = sample_symbol(lambda x, xi: (1.0 + xi**2) ** (1.0 / 6.0) + 0.0 * x,
                          grid, (1.0 / 3.0, 0.0))
        floor = garding_floor(quantize(p))
        assert floor >= 0.0
        assert floor == pytest.approx(1.0, rel=1e-6)   # attained at xi = 0

    def test_select_lambda(self):
        S = np.eye(8)
        B = -2.0 * np.eye(8)
        rep = select_lambda(S, B, lams=(1.0, 5.0))
        assert rep["lam"] == 5.0
        assert rep["floor"] == pytest.approx(3.0)

    def test_select_lambda_exhausted(self):
        with pytest.raises(ValueError, match="floor"):
            select_lambda(np.eye(4), -100.0 * np.eye(4), lams=(1.0, 5.0))


class TestGronwallFit:
    def _trace(self, l2, cumF):
        tr = EnergyTrace(t=list(range(len(l2))), l2=list(l2),
                         weighted=list(l2), cumF=list(cumF),
                         cumF_literal=list(cumF))
        return tr

    def test_conservative_zero_source(self):
        rep = gronwall_fit(self._trace([2.0, 2.0, 2.0], [0.0, 0.0, 0.0]))
        assert rep["C"] == pytest.approx(1.0)

    def test_damped_mode(self):
        rep = gronwall_fit(self._trace([1.0, 0.5, 0.1], [0.0, 0.0, 0.0]))
        assert rep["C"] == pytest.approx(1.0)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            gronwall_fit(self._trace([0.0, 1.0], [0.0, 0.0]))

    def test_zero_everything_is_trivial(self):
        rep = gronwall_fit(self._trace([0.0, 0.0], [0.0, 0.0]))
        assert rep["C"] == 1.0
