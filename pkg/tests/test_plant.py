import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourtank.exceptions import DomainError, InvalidInputError, OverflowEquilibriumError
from fourtank.plant import (
    OperatingPoint,
    PlantParams,
    NOMINAL_OPERATING_POINT,
    derivatives,
    equilibrium,
    linearize,
    mass_balance_residual,
    measure,
    time_constants,
)

NOMINAL_LEVELS = (12.4, 12.7, 1.8, 1.4)

# published linear model, rounded to three significant figures
TABULATED_A = np.array(
    [
        [-0.0159, 0, 0.0419, 0],
        [0, -0.0111, 0, 0.0333],
        [0, 0, -0.0419, 0],
        [0, 0, 0, -0.0333],
    ]
)
TABULATED_B = np.array([[0.0833, 0], [0, 0.0628], [0, 0.0479], [0.0312, 0]])
TABULATED_C = np.array([[0.5, 0, 0, 0], [0, 0.5, 0, 0]])

levels = st.lists(st.floats(0.0, 20.0), min_size=4, max_size=4)
voltages = st.lists(st.floats(0.0, 10.0), min_size=2, max_size=2)


def fd_jacobian(f, x0, step=1e-5):
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for i in range(x0.size):
        dx = np.zeros_like(x0)
        dx[i] = step
        cols.append((f(x0 + dx) - f(x0 - dx)) / (2 * step))
    return np.column_stack(cols)


class TestParams:
    def test_defaults_match_tables(self, params):
        assert params.tank_area == (28.0, 32.0, 28.0, 32.0)
        assert params.orifice_area == (0.071, 0.057, 0.071, 0.057)
        assert (params.pump_gain_1, params.pump_gain_2) == (3.33, 3.35)
        assert (params.valve_split_1, params.valve_split_2) == (0.7, 0.6)
        assert params.sensor_gain == 0.5 and params.gravity == 981.0
        assert params.tank_height == 20.0 and params.pump_voltage_range == (0.0, 10.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"valve_split_1": 1.0},
            {"valve_split_2": 0.0},
            {"gravity": -1.0},
            {"tank_area": (28, 32, 0, 32)},
            {"pump_voltage_range": (10, 0)},
            {"orifice_area": (0.1, 0.1, 0.1)},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            PlantParams(**kwargs)

    def test_operating_point_needs_positive_levels(self):
        with pytest.raises(DomainError):
            OperatingPoint((12.4, 0.0, 1.8, 1.4), (3, 3))


class TestDerivatives:
    def test_empty_and_unpowered(self, params):
        assert np.all(derivatives(params, [0, 0, 0, 0], [0, 0]) == 0)

    def test_tank3_rate_at_nominal_levels(self, params):
        rates = derivatives(params, NOMINAL_LEVELS, [3, 3])
        assert rates[2] == pytest.approx(-0.00712, abs=1e-5)

    def test_tank4_rate_by_substitution(self, params):
        expected = (-0.057 * math.sqrt(2 * 981 * 1.4) + 0.3 * 3.33 * 3) / 32
        rates = derivatives(params, NOMINAL_LEVELS, [3, 3])
        assert rates[3] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(3.0108e-4, rel=1e-3)

    def test_negative_level_treated_as_empty(self, params):
        a = derivatives(params, [-0.5, 3, 2, 1], [1, 1])
        b = derivatives(params, [0.0, 3, 2, 1], [1, 1])
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("bad", [[np.nan, 1, 1, 1], [1, np.inf, 1, 1]])
    def test_non_finite_rejected(self, params, bad):
        with pytest.raises(InvalidInputError):
            derivatives(params, bad, [3, 3])

    def test_wrong_size_rejected(self, params):
        with pytest.raises(InvalidInputError):
            derivatives(params, [1, 1, 1], [3, 3])

    @settings(max_examples=100)
    @given(levels)
    def test_monotone_drain(self, h):
        rates = derivatives(PlantParams(), h, [0, 0])
        # lower tanks can still gain from upper tanks; upper tanks only drain
        assert rates[2] <= 0 and rates[3] <= 0
        total = np.dot(PlantParams().tank_area, rates)
        assert total <= 1e-12


class TestMassBalance:
    def test_table2(self, params):
        rates = derivatives(params, NOMINAL_LEVELS, [3, 3])
        assert abs(mass_balance_residual(params, NOMINAL_LEVELS, [3, 3], rates)) < 1e-9

    def test_zero_rates_at_equilibrium(self, params):
        h = equilibrium(params, [3, 3])
        rates = derivatives(params, h, [3, 3])
        assert abs(mass_balance_residual(params, h, [3, 3], rates)) < 1e-9

    @settings(max_examples=1000, deadline=None)
    @given(levels, voltages)
    def test_conservation_property(self, h, v):
        p = PlantParams()
        rates = derivatives(p, h, v)
        assert abs(mass_balance_residual(p, h, v, rates)) < 1e-9


class TestEquilibrium:
    def test_no_inflow(self, params):
        assert np.all(equilibrium(params, [0, 0]) == 0)

    def test_values_at_3v(self, params):
        h = equilibrium(params, [3, 3])
        assert h[2] == pytest.approx(1.634, abs=1e-3)
        assert h[0] == pytest.approx(12.26, abs=1e-2)
        assert h[0] == pytest.approx(((0.7 * 3.33 * 3 + 0.4 * 3.35 * 3) / 0.071) ** 2 / 1962, rel=1e-12)
        assert h[3] == pytest.approx((0.3 * 3.33 * 3 / 0.057) ** 2 / 1962, rel=1e-12)

    @settings(max_examples=200)
    @given(voltages)
    def test_fixed_point(self, v):
        p = PlantParams(tank_height=1e6)
        h = equilibrium(p, v)
        assert np.max(np.abs(derivatives(p, h, v))) < 1e-10

    def test_overflow_names_tank(self, params):
        with pytest.raises(OverflowEquilibriumError) as info:
            equilibrium(params, [10, 10])
        assert info.value.tank in (1, 2)

    def test_negative_voltage(self, params):
        with pytest.raises(DomainError):
            equilibrium(params, [-1, 3])


class TestLinearization:
    def test_time_constants_match_tabulated(self, params):
        T = time_constants(params, NOMINAL_LEVELS)
        assert T[0] == pytest.approx(62.7, abs=0.05)
        assert T[2] == pytest.approx(23.9, abs=0.05)
        assert -1 / T[0] == pytest.approx(-0.0159, rel=0.02)
        assert -1 / T[2] == pytest.approx(-0.0419, rel=0.02)

    def test_time_constants_scale(self, params):
        T = time_constants(params, NOMINAL_LEVELS)
        T4 = time_constants(params, [4 * h for h in NOMINAL_LEVELS])
        np.testing.assert_allclose(T4, 2 * T, rtol=1e-14)

    def test_time_constants_domain(self, params):
        with pytest.raises(DomainError):
            time_constants(params, [1, 1, 0, 1])

    def test_matches_tabulated(self, linear_model):
        for ours, tabulated in ((linear_model.A, TABULATED_A), (linear_model.B, TABULATED_B), (linear_model.C, TABULATED_C)):
            nz = tabulated != 0
            np.testing.assert_allclose(ours[nz], tabulated[nz], rtol=0.02)
            assert np.all(ours[~nz] == 0)

    def test_b11(self, linear_model):
        assert linear_model.B[0, 0] == pytest.approx(0.7 * 3.33 / 28, rel=1e-14)
        assert linear_model.B[0, 0] == pytest.approx(0.0833, abs=5e-5)

    def test_diagonal_negative(self, linear_model):
        assert np.all(np.diag(linear_model.A) < 0)

    @pytest.mark.parametrize(
        "levels0,volts0",
        [(NOMINAL_LEVELS, (3, 3)), ((5.0, 7.0, 2.5, 0.8), (2.0, 4.0)), ((15.0, 3.0, 9.0, 0.2), (6.0, 1.0))],
    )
    def test_jacobian(self, params, levels0, volts0):
        lm = linearize(params, OperatingPoint(levels0, volts0))
        J_h = fd_jacobian(lambda h: derivatives(params, h, volts0), levels0)
        J_v = fd_jacobian(lambda v: derivatives(params, levels0, v), volts0)
        np.testing.assert_allclose(J_h, lm.A, atol=1e-6, rtol=0)
        np.testing.assert_allclose(J_v, lm.B, atol=1e-6, rtol=0)


class TestMeasure:
    @pytest.mark.parametrize(
        "h,expected",
        [((0, 0, 0, 0), (0, 0)), ((12.4, 12.7, 1.8, 1.4), (6.2, 6.35)), ((20, 0, 0, 0), (10, 0))],
    )
    def test_values(self, params, h, expected):
        np.testing.assert_allclose(measure(params, h), expected, rtol=1e-14)
