import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rectiflow.errors import InvalidParameter, NonPositiveEnergy
from rectiflow.thermal import (
    CouplingConfig,
    Orientation,
    ThermalScenario,
    bose_einstein,
    rates,
    side_couplings,
)


class TestBoseEinstein:
    def test_cold_limit_is_finite(self):
        n = bose_einstein(1.0, 0.001)
        assert math.isfinite(n) and 0 <= n < 1e-300

    def test_unit_ratio(self):
        assert bose_einstein(1.0, 1.0) == pytest.approx(1 / (math.e - 1), rel=1e-15)
        assert bose_einstein(1.0, 1.0) == pytest.approx(0.581977, abs=1e-6)

    def test_hot_limit_series(self):
        n = bose_einstein(1.0, 100.0)
        assert n == pytest.approx(100 - 0.5, rel=1e-2)
        assert n == pytest.approx(100 - 0.5 + 1 / 1200, rel=1e-9)

    def test_laurent_branch_continuity(self):
        for x in (0.9e-6, 1.1e-6):
            exact = 1 / math.expm1(x)
            assert bose_einstein(x, 1.0) == pytest.approx(exact, rel=1e-12)

    def test_large_branch_continuity(self):
        for x in (29.9, 30.1, 100.0):
            assert bose_einstein(x, 1.0) == pytest.approx(1 / math.expm1(x), rel=1e-14)

    @pytest.mark.parametrize("e", [0.0, -0.1])
    def test_nonpositive_energy(self, e):
        with pytest.raises(NonPositiveEnergy):
            bose_einstein(e, 1.0)

    def test_vectorized(self):
        e = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(bose_einstein(e, 1.0), 1 / np.expm1(e), rtol=1e-14)

    def test_monotone(self):
        t = np.linspace(0.01, 10, 400)
        e = np.linspace(0.01, 10, 400)
        assert np.all(np.diff(bose_einstein(1.0, t)) > 0)
        assert np.all(np.diff(bose_einstein(e, 1.0)) < 0)


class TestRates:
    def test_zero_temperature_limit(self):
        up, down = rates(1.0, 1e-3, 0.002)
        assert up == 0.0 and down == 0.002

    def test_decoupled_side(self):
        assert rates(1.0, 1.0, 0.0) == (0.0, 0.0)

    def test_reference_values(self):
        up, down = rates(1.0, 1.0, 0.001)
        assert up == pytest.approx(0.001 * 0.581977, rel=1e-6)
        assert down == pytest.approx(0.001 * 1.581977, rel=1e-6)

    def test_negative_coupling(self):
        with pytest.raises(InvalidParameter):
            rates(1.0, 1.0, -1e-3)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(1e-4, 1.0))
    def test_detailed_balance_gap(self, e, t, g):
        up, down = rates(e, t, g)
        assert down > up >= 0
        # exact up to the rounding of the larger rate
        assert abs((down - up) - g) <= 4 * np.finfo(float).eps * down

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 700), st.floats(0.1, 10))
    def test_boltzmann_ratio(self, x, t):
        up, down = rates(x * t, t, 1.0)
        assert up / down == pytest.approx(math.exp(-x), rel=1e-12)


class TestCoupling:
    def test_symmetric(self):
        assert side_couplings(CouplingConfig(0.001, 0.0)) == (0.001, 0.001)

    def test_fully_asymmetric(self):
        assert side_couplings(CouplingConfig(0.001, 1.0)) == (0.0, 0.002)

    def test_negative_chi(self):
        gl, gr = side_couplings(CouplingConfig(0.001, -0.4))
        assert gl == pytest.approx(0.0014) and gr == pytest.approx(0.0006)

    @given(st.floats(-1, 1))
    def test_sum_is_conserved(self, chi):
        gl, gr = side_couplings(CouplingConfig(0.001, chi))
        assert gl + gr == pytest.approx(0.002, rel=1e-14)

    @pytest.mark.parametrize("gamma,chi", [(0.0, 0.1), (-1.0, 0.0), (1.0, 1.5)])
    def test_invalid(self, gamma, chi):
        with pytest.raises(InvalidParameter):
            CouplingConfig(gamma, chi)


class TestScenario:
    def test_orientation(self):
        sc = ThermalScenario(2.0, 0.01)
        assert (sc.T_left, sc.T_right) == (2.0, 0.01)
        rev = sc.reversed()
        assert rev.orientation is Orientation.HOT_RIGHT
        assert (rev.T_left, rev.T_right) == (0.01, 2.0)

    @pytest.mark.parametrize("th,tc", [(0.0, 0.01), (1.0, -1.0), (0.5, 1.0)])
    def test_invalid(self, th, tc):
        with pytest.raises(InvalidParameter):
            ThermalScenario(th, tc)
