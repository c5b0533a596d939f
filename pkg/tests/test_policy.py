import math

import numpy as np
import pytest

from periodiv.errors import DomainError
from periodiv.policy import ConstantRetention, OptimalStrategy, dividend, retention
from periodiv.valuefn import solve


class TestRetention:
    def test_full_risk_branch_is_one_everywhere(self, row1):
        strat = OptimalStrategy(solve(row1, 2.0))
        for x in (1e-6, 0.05, 0.2, 3.0):
            assert retention(strat, x) == 1.0

    def test_noncheap_limit_at_zero(self, row2):
        # 2*(mu - eta)/mu as the surplus vanishes.
        strat = OptimalStrategy(solve(row2, 2.0))
        expected = 2.0 * (row2.mu - row2.eta) / row2.mu
        assert retention(strat, 1e-10) == pytest.approx(expected, abs=1e-6)
        assert expected < 1.0

    def test_cheap_linear_half(self, row3):
        strat = OptimalStrategy(solve(row3, 2.0**2.2))
        x_hat = strat.solution.x_switch
        assert retention(strat, 0.5 * x_hat) == pytest.approx(0.5, abs=1e-10)

    def test_nondecreasing_and_continuous(self, row2, row3):
        for p, g in ((row2, 2.0), (row2, 2.0**-0.4), (row2, 2.0**-1.4), (row3, 2.0**0.8)):
            strat = OptimalStrategy(solve(p, g))
            xs = np.linspace(1e-5, strat.solution.x_switch * 1.5 + 0.01, 400)
            us = [retention(strat, float(x)) for x in xs]
            assert all(a <= b + 1e-9 for a, b in zip(us, us[1:]))
            assert all(0.0 <= u <= 1.0 for u in us)
            jumps = max(abs(b - a) for a, b in zip(us, us[1:]))
            assert jumps < 0.05

    def test_constant_strategy(self):
        strat = ConstantRetention(u=0.37, barrier=1.0)
        assert retention(strat, 5.0) == 0.37

    def test_rejects_nonpositive_x(self, row1):
        strat = OptimalStrategy(solve(row1, 2.0))
        with pytest.raises(DomainError):
            retention(strat, 0.0)

    def test_constant_validation(self):
        with pytest.raises(DomainError):
            ConstantRetention(u=1.2, barrier=0.5)
        with pytest.raises(DomainError):
            ConstantRetention(u=0.5, barrier=-0.1)


class TestDividend:
    def test_at_barrier_nothing(self, row1):
        strat = OptimalStrategy(solve(row1, 2.0))
        assert dividend(strat, strat.solution.b) == 0.0

    def test_excess_paid(self, row1):
        strat = OptimalStrategy(solve(row1, 2.0))
        assert dividend(strat, strat.solution.b + 0.3) == pytest.approx(0.3, rel=1e-12)

    def test_zero_barrier_pays_everything(self, row1):
        strat = OptimalStrategy(solve(row1, 2.0**-2.4))
        assert strat.solution.b == 0.0
        assert dividend(strat, 0.7) == 0.7

    def test_never_exceeds_surplus(self, row2):
        strat = OptimalStrategy(solve(row2, 2.0))
        for x in (0.0, 0.01, 0.2, 5.0):
            d = dividend(strat, x)
            assert 0.0 <= d <= x
            assert min(x, strat.solution.b) == pytest.approx(x - d, rel=1e-12, abs=1e-15)

    def test_infinite_barrier(self):
        strat = ConstantRetention(u=1.0, barrier=math.inf)
        assert dividend(strat, 100.0) == 0.0
