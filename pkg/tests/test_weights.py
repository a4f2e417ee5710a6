import numpy as np
import pytest

from phasecalc.weights import (
    BracketPower,
    Constant,
    TabulatedEnvelope,
    bracket,
    check_weight_axioms,
    metric_order_check,
    optimal_phi,
    weight_from_json,
    weight_join,
    weight_meet,
    weight_to_json,
    default_axiom_grid,
)


def f_osc(t):
    """Oscillatory time factor 1 + t sin(t^(-4/3)), extended by 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    pos = t > 0
    out[pos] = 1.0 + t[pos] * np.sin(t[pos] ** (-4.0 / 3.0))
    return out


class TestAxioms:
    def test_constant_one_passes_everything(self):
        report = check_weight_axioms(Constant(1.0))
        assert report.passed
        for entry in report.entries.values():
            assert entry.constant <= 1.0 + 1e-9

    def test_bracket_sublinear_and_subadditive(self):
        report = check_weight_axioms(BracketPower(1.0))
        assert report.passed
        assert report.entries["sl"].constant <= np.sqrt(2.0)
        # grid supremum of <x+y>/(<x>+<y>) stays below 1
        assert report.entries["sa"].constant <= 1.0 + 1e-12

    def test_bracket_half_derivative_axiom(self):
        # |Phi'| <x> / Phi = kappa |x| / <x>^2 * <x> <= kappa for kappa = 1/2
        report = check_weight_axioms(BracketPower(0.5))
        assert report.passed
        assert report.entries["deriv"].constant <= 0.5 + 1e-9

    def test_nonsymmetric_grid_rejected(self):
        with pytest.raises(ValueError):
            check_weight_axioms(Constant(1.0), x_grid=np.linspace(0, 64, 65))

    def test_bad_tabulated_values_rejected(self):
        with pytest.raises(ValueError):
            TabulatedEnvelope([0.0, 1.0, 2.0], [1.0, -2.0, 3.0])
        with pytest.raises(ValueError):
            TabulatedEnvelope([0.0, 0.0, 2.0], [1.0, 2.0, 3.0])

    def test_report_serializes(self):
        report = check_weight_axioms(BracketPower(1.0))
        text = report.to_json()
        assert '"passed": true' in text


class TestLattice:
    def test_join_of_constants(self):
        j = weight_join(Constant(1.0), Constant(2.0))
        g = default_axiom_grid()
        assert np.allclose(j(g), 2.0)

    def test_meet_clips_bracket(self):
        m = weight_meet(BracketPower(1.0), Constant(3.0))
        g = default_axiom_grid()
        assert np.allclose(m(g), np.minimum(bracket(g), 3.0))

    def test_join_of_powers_is_larger_power(self):
        j = weight_join(BracketPower(0.5), BracketPower(1.0 / 3.0))
        g = default_axiom_grid()
        assert np.allclose(j(g), bracket(g) ** 0.5)

    def test_lattice_laws_pointwise(self):
        g = default_axiom_grid()
        w1, w2, w3 = BracketPower(0.5), Constant(2.0), BracketPower(1.0)
        assert np.allclose(weight_join(w1, w2)(g), weight_join(w2, w1)(g))
        assert np.allclose(
            weight_join(weight_join(w1, w2), w3)(g),
            weight_join(w1, weight_join(w2, w3))(g),
        )
        assert np.allclose(weight_meet(w1, w1)(g), w1(g))

    def test_join_repasses_axioms(self):
        j = weight_join(BracketPower(0.5), Constant(2.0))
        report = check_weight_axioms(j)
        base = check_weight_axioms(BracketPower(0.5))
        for name in ("sl", "sv", "sa"):
            assert report.entries[name].constant <= 2.0 * max(
                base.entries[name].constant, 1.0
            )


class TestOptimalPhi:
    def test_constant_coefficient(self):
        phi = optimal_phi(lambda t, x: np.full_like(x, 2.0), 2.0,
                          np.linspace(0, 1, 11), default_axiom_grid())
        assert np.allclose(phi(default_axiom_grid()), 1.0)

    def test_time_factor_infimum(self):
        # a = (2+t) <x>^2 with delta0 = 2: inf_t sqrt((2+t)/2) = 1 at t = 0
        x_grid = default_axiom_grid()
        phi = optimal_phi(lambda t, x: (2.0 + t) * bracket(x) ** 2, 2.0,
                          np.linspace(0, 1, 11), x_grid)
        assert np.allclose(phi(x_grid), bracket(x_grid), rtol=1e-12)

    def test_oscillatory_model_envelope(self):
        # a = <x> (2 + sin <x>^(1/2)) f(t): envelope proportional to <x>^(1/2)
        x_grid = default_axiom_grid()
        t_grid = np.linspace(0.0, 1.0, 101)

        def a(t, x):
            return bracket(x) * (2.0 + np.sin(bracket(x) ** 0.5)) * f_osc(t)

        delta0 = float(min(np.asarray([a(t, x_grid) for t in t_grid]).min(), 1.0))
        phi = optimal_phi(a, delta0, t_grid, x_grid)
        vals = phi(x_grid)
        quot = vals / bracket(x_grid) ** 0.5
        assert quot.max() / quot.min() < 4.0  # comparable to <x>^(1/2)
        fvals = f_osc(t_grid)
        assert phi.sandwich_constant <= 3.0 * fvals.max() / fvals.min() + 1e-9

    def test_hyperbolicity_violation(self):
        with pytest.raises(ValueError):
            optimal_phi(lambda t, x: np.full_like(x, 0.5), 2.0,
                        np.linspace(0, 1, 5), default_axiom_grid())


class TestOrderReversal:
    def test_constant_below_bracket(self):
        res = metric_order_check(Constant(1.0), BracketPower(1.0))
        assert res["w1_less_w2"] and res["reversal"]

    def test_bracket_not_below_root(self):
        res = metric_order_check(BracketPower(1.0), BracketPower(0.5))
        assert not res["w1_less_w2"]

    def test_reflexive(self):
        res = metric_order_check(BracketPower(0.5), BracketPower(0.5))
        assert res["w1_less_w2"] and res["reversal"]
        assert res["c"] <= 1.0 + 1e-12


class TestSerialization:
    @pytest.mark.parametrize(
        "w",
        [Constant(2.0), BracketPower(0.5),
         TabulatedEnvelope(np.linspace(-64, 64, 65), bracket(np.linspace(-64, 64, 65)))],
    )
    def test_roundtrip(self, w):
        w2 = weight_from_json(weight_to_json(w))
        g = default_axiom_grid()
        assert np.allclose(w(g), w2(g))
