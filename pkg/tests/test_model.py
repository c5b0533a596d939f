import math

import pytest

from periodiv.errors import DomainError, RegimeError
from periodiv.model import (
    ModelParams,
    RegimeCase,
    alpha_level,
    char_roots,
    cheap_basis,
    cheap_switch,
    classify,
    fit_target,
    full_risk_basis,
    lambda_radical,
    noncheap_constants,
    retention_basis,
    thresholds,
    zero_barrier_lhs,
    zero_barrier_rhs,
)


class TestParams:
    def test_validation(self):
        with pytest.raises(DomainError):
            ModelParams(delta=0.0, sigma=0.3, mu=1.0, eta=0.5)
        with pytest.raises(DomainError):
            ModelParams(delta=0.5, sigma=-0.3, mu=1.0, eta=0.5)
        with pytest.raises(DomainError):
            ModelParams(delta=0.5, sigma=0.3, mu=0.4, eta=0.5)
        with pytest.raises(DomainError):
            ModelParams(delta=0.5, sigma=0.3, mu=0.4, eta=0.0)

    def test_eta_bar(self, row2):
        assert row2.eta_bar == pytest.approx(2 * 0.09 / 0.64, rel=1e-15)


class TestCharRoots:
    def test_row1_theta_values(self, row1):
        r = char_roots(row1, 1e-9)
        assert r.theta_minus == pytest.approx(-6.22839, abs=1e-5)
        assert r.theta_plus == pytest.approx(1.78395, abs=1e-5)

    def test_negative_root_matches_radical(self, row1):
        for g in (0.1, 1.0, 10.0):
            r = char_roots(row1, g)
            assert r.lambda_gamma == pytest.approx(lambda_radical(row1, g), abs=1e-12)

    def test_vieta_product(self, row2):
        r = char_roots(row2, 1.0)
        assert r.theta_plus * r.theta_minus == pytest.approx(
            -2 * row2.delta / row2.sigma**2, rel=1e-12
        )

    def test_ordering(self, row2):
        r = char_roots(row2, 2.0)
        assert r.lambda_gamma < r.theta_minus < 0.0 < r.theta_plus

    def test_residuals(self, row3):
        g = 3.0
        r = char_roots(row3, g)
        half = 0.5 * row3.sigma**2
        for root, shift in ((r.theta_plus, 0.0), (r.theta_minus, 0.0), (r.lambda_gamma, g)):
            assert abs(half * root**2 + row3.eta * root - (row3.delta + shift)) <= 1e-10


class TestFitTarget:
    def test_zero_at_closed_form_threshold(self, row1):
        assert fit_target(row1, 0.28125) == pytest.approx(0.0, abs=1e-10)

    def test_value_near_gamma1(self, row2):
        target = (2 * row2.eta - row2.mu) / (2 * row2.delta)
        assert fit_target(row2, 1.0078) == pytest.approx(target, abs=5e-4)

    def test_strictly_increasing(self, row1, row2, row3):
        for p in (row1, row2, row3):
            gs = [2.0**k for k in range(-8, 14)]
            vals = [fit_target(p, g) for g in gs]
            assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_limits(self, row1):
        r = char_roots(row1, 1.0)
        assert fit_target(row1, 1e-10) == pytest.approx(1.0 / r.theta_minus, abs=1e-6)
        assert fit_target(row1, 1e12) == pytest.approx(row1.eta / row1.delta, abs=1e-4)


class TestBases:
    def test_full_risk_ratio_matches_reported_barrier(self, row1):
        basis = full_risk_basis(row1)
        assert basis.ratio(0.1082) == pytest.approx(fit_target(row1, 2.0**-0.2), abs=1e-3)

    def test_full_risk_ratio_limit(self, row1):
        basis = full_risk_basis(row1)
        r = char_roots(row1, 1.0)
        assert basis.ratio(20.0 / r.theta_plus) == pytest.approx(1.0 / r.theta_plus, abs=1e-6)

    def test_retention_ratio_low_limit(self, row2):
        basis = retention_basis(row2)
        assert basis.ratio(1e-9) == pytest.approx(
            (2 * row2.eta - row2.mu) / (2 * row2.delta), abs=1e-7
        )

    def test_cheap_ratio_low_limit(self, row3):
        basis = cheap_basis(row3)
        assert basis.ratio(1e-9) == pytest.approx(row3.mu / (2 * row3.delta), abs=1e-7)

    def test_ratios_increasing(self, row1, row2, row3):
        grids = [
            (full_risk_basis(row1), [0.01 * k for k in range(1, 60)]),
            (retention_basis(row2), [0.01 * k for k in range(1, 60)]),
            (cheap_basis(row3), [0.01 * k for k in range(1, 60)]),
        ]
        for basis, grid in grids:
            vals = [basis.ratio(b) for b in grid]
            assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_ratio_rejects_nonpositive(self, row1):
        with pytest.raises(DomainError):
            full_risk_basis(row1).ratio(0.0)

    def test_regime_guards(self, row1, row3):
        with pytest.raises(RegimeError):
            retention_basis(row1)
        with pytest.raises(RegimeError):
            cheap_basis(row1)
        with pytest.raises(RegimeError):
            retention_basis(row3)


class TestSwitchGeometry:
    def test_x_bar_value(self, row2):
        _, _, _, x_bar = noncheap_constants(row2)
        assert x_bar == pytest.approx(0.051208, abs=1e-6)

    def test_x_hat_value(self, row3):
        assert cheap_switch(row3) == pytest.approx(0.141129, abs=1e-6)


class TestZeroBarrierFunctions:
    def test_alpha_decreasing_and_one_at_gamma1(self, row2):
        g1 = thresholds(row2).gamma1
        gs = [g1 * f for f in (0.05, 0.1, 0.3, 0.6, 0.9, 0.999999)]
        vals = [alpha_level(row2, g) for g in gs]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(1.0, abs=1e-4)
        assert all(v > 1.0 for v in vals[:-1])

    def test_lhs_small_gamma_limit(self, row2):
        eb = row2.eta_bar
        limit = eb * (row2.mu - row2.eta) / (eb * row2.delta + 1.0)
        assert zero_barrier_lhs(row2, 1e-7) == pytest.approx(limit, rel=1e-3)

    def test_lhs_rhs_cross_at_gamma2(self, row2):
        g2 = thresholds(row2).gamma2
        assert g2 == pytest.approx(0.3979, abs=5e-4)
        assert zero_barrier_lhs(row2, g2) - zero_barrier_rhs(row2, g2) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_monotone_pieces(self, row2):
        g1 = thresholds(row2).gamma1
        gs = [g1 * f for f in (0.05, 0.2, 0.4, 0.6, 0.8, 0.95)]
        lhs = [zero_barrier_lhs(row2, g) for g in gs]
        rhs = [zero_barrier_rhs(row2, g) for g in gs]
        assert all(a < b for a, b in zip(lhs, lhs[1:]))
        assert all(a < b for a, b in zip(rhs, rhs[1:]))

    def test_regime_guard(self, row1):
        with pytest.raises(RegimeError):
            zero_barrier_lhs(row1, 0.5)


class TestThresholds:
    def test_row1_gamma0(self, row1):
        th = thresholds(row1)
        assert th.gamma0 == pytest.approx(0.28125, abs=1e-12)
        assert th.gamma0 == pytest.approx(0.2812, abs=1e-3)
        assert th.gamma1 is None and th.gamma2 is None and th.gamma_bar1 is None

    def test_row2_gamma1_gamma2(self, row2):
        th = thresholds(row2)
        assert th.gamma1 == pytest.approx(1.0078125, abs=1e-12)
        assert th.gamma1 == pytest.approx(1.0078, abs=5e-4)
        assert th.gamma2 == pytest.approx(0.3979, abs=5e-4)
        assert 0.0 < th.gamma2 < th.gamma1

    def test_row3_gamma_bar1(self, row3):
        th = thresholds(row3)
        assert th.gamma_bar1 == pytest.approx(3.795918, abs=5e-4)

    def test_closed_form_vs_root(self, row1, row2, row3):
        # thresholds() raises internally if the root-found value disagrees
        # with the closed form beyond 1e-8; reaching here means they agree.
        for p in (row1, row2, row3):
            thresholds(p)


class TestClassify:
    def test_row1(self, row1):
        assert classify(row1, 2.0**-2.4).case is RegimeCase.A2
        assert classify(row1, 2.0**-0.2).case is RegimeCase.A1

    def test_row2(self, row2):
        assert classify(row2, 2.0).case is RegimeCase.B1
        assert classify(row2, 2.0**-0.4).case is RegimeCase.B2
        assert classify(row2, 2.0**-1.4).case is RegimeCase.B3

    def test_row3(self, row3):
        assert classify(row3, 2.0**2.2).case is RegimeCase.C1
        assert classify(row3, 2.0**0.8).case is RegimeCase.C2

    def test_boundary_goes_to_lower_case(self, row1, row2, row3):
        assert classify(row1, thresholds(row1).gamma0).case is RegimeCase.A2
        assert classify(row2, thresholds(row2).gamma1).case is RegimeCase.B2
        assert classify(row2, thresholds(row2).gamma2).case is RegimeCase.B3
        assert classify(row3, thresholds(row3).gamma_bar1).case is RegimeCase.C2

    def test_mu_exactly_twice_eta_is_full_risk_branch(self):
        p = ModelParams(delta=0.5, sigma=0.3, mu=1.0, eta=0.5)
        assert classify(p, 1.0).case in (RegimeCase.A1, RegimeCase.A2)

    def test_total_on_gamma_grid(self, row1, row2, row3):
        for p in (row1, row2, row3):
            for k in range(-10, 11):
                classify(p, 2.0**k)

    def test_rejects_nonpositive_gamma(self, row1):
        with pytest.raises(DomainError):
            classify(row1, 0.0)


def test_optimal_slope_identity_between_m_routes(row2):
    # Two independent routes to the low-barrier slope constant must agree:
    # the direct formula and the exp(-gamma*eta_bar)*(lhs-rhs) rewriting.
    from periodiv.valuefn import build_B2

    g = 2.0**-0.4
    sol = build_B2(row2, g)
    m_direct = sol.constants["M"]
    eb = row2.eta_bar
    q, c21, _, _ = noncheap_constants(row2)
    gap = zero_barrier_lhs(row2, g) - zero_barrier_rhs(row2, g)
    m_alt = math.log(math.exp(-g * eb) * gap / (row2.delta * eb * c21) + 1.0) / q
    assert m_direct == pytest.approx(m_alt, rel=1e-9)
