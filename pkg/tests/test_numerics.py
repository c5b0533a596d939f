import math
import random

import numpy as np
import pytest

from periodiv.errors import BracketError, DomainError, NumericalError, RangeError
from periodiv.model import fit_target, full_risk_basis
from periodiv.numerics import (
    Bracket,
    GammaLaw,
    expand_bracket,
    find_root,
    gamma_cdf,
    gamma_inv_cdf,
    gamma_pdf,
    integrate,
    invert_monotone,
    quadratic_roots,
)


class TestQuadraticRoots:
    def test_row1_characteristic_quadratic(self, row1):
        # Closed-form oracle: (-a1 +- sqrt(a1^2 - 4 a2 a0)) / (2 a2).
        s = math.sqrt(0.2**2 + 4.0 * 0.045 * 0.5)
        expected = ((-0.2 - s) / 0.09, (-0.2 + s) / 0.09)
        lo, hi = quadratic_roots(0.045, 0.2, -0.5)
        assert lo == pytest.approx(expected[0], abs=1e-12)
        assert hi == pytest.approx(expected[1], abs=1e-12)
        assert lo == pytest.approx(-6.228390306071101, abs=1e-9)
        assert hi == pytest.approx(1.7839458616266568, abs=1e-9)

    def test_symmetric_roots(self):
        assert quadratic_roots(1.0, 0.0, -1.0) == (-1.0, 1.0)

    def test_vieta_product_shifted_constant(self):
        lo, hi = quadratic_roots(0.045, 0.2, -2.5)
        assert lo * hi == pytest.approx(-2.5 / 0.045, rel=1e-12)

    def test_vieta_on_random_coefficients(self):
        rng = random.Random(20240601)
        for _ in range(200):
            a2 = rng.uniform(0.01, 5.0)
            a1 = rng.uniform(-5.0, 5.0)
            a0 = -rng.uniform(0.01, 5.0)  # opposite signs guarantee real roots
            lo, hi = quadratic_roots(a2, a1, a0)
            assert lo + hi == pytest.approx(-a1 / a2, rel=1e-10, abs=1e-10)
            assert lo * hi == pytest.approx(a0 / a2, rel=1e-10, abs=1e-10)
            for r in (lo, hi):
                assert abs(a2 * r * r + a1 * r + a0) <= 1e-12 * max(1.0, abs(a0)) * 100

    def test_rejects_nonpositive_discriminant(self):
        with pytest.raises(DomainError):
            quadratic_roots(1.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            quadratic_roots(-1.0, 0.0, -1.0)


class TestFindRoot:
    def test_sqrt_two(self):
        root = find_root(lambda x: x * x - 2.0, Bracket(1.0, 2.0), tol=1e-12)
        assert root == pytest.approx(math.sqrt(2.0), abs=1e-11)

    def test_threshold_of_fit_target(self, row1):
        # Closed form for the zero of the fit target: (sigma*delta/eta)^2 / 2.
        root = find_root(lambda g: fit_target(row1, g), Bracket(1e-6, 10.0))
        assert root == pytest.approx(0.28125, abs=1e-10)

    def test_identity_zero(self):
        assert find_root(lambda x: x, Bracket(-1.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_no_sign_change_raises(self):
        with pytest.raises(BracketError):
            find_root(lambda x: 1.0 + x * x, Bracket(-1.0, 1.0))

    def test_root_stays_inside_bracket(self):
        rng = random.Random(7)
        for _ in range(50):
            r = rng.uniform(-3.0, 3.0)
            lo, hi = r - rng.uniform(0.1, 2.0), r + rng.uniform(0.1, 2.0)
            root = find_root(lambda x, r=r: math.tanh(x - r), Bracket(lo, hi))
            assert lo <= root <= hi
            assert root == pytest.approx(r, abs=1e-9)


class TestInvertMonotone:
    def test_exponential(self):
        x = invert_monotone(math.exp, math.e, Bracket(0.0, 2.0))
        assert x == pytest.approx(1.0, abs=1e-12)

    def test_barrier_from_ratio_matches_reported_value(self, row1):
        # Reported barrier for gamma = 2^-0.2 on the first parameter row.
        basis = full_risk_basis(row1)
        target = fit_target(row1, 2.0**-0.2)
        b = invert_monotone(basis.ratio, target, Bracket(1e-8, 5.0))
        assert b == pytest.approx(0.1082, abs=1e-3)

    def test_gamma_cdf_round_trip(self):
        law = GammaLaw(shape=3.7, rate=2.1)
        x = invert_monotone(lambda t: gamma_cdf(law, t), 0.5, Bracket(1e-12, 50.0))
        assert gamma_cdf(law, x) == pytest.approx(0.5, abs=1e-10)

    def test_target_outside_range_raises(self):
        with pytest.raises(RangeError):
            invert_monotone(math.exp, 100.0, Bracket(0.0, 1.0))

    def test_result_inside_bracket_decreasing(self):
        x = invert_monotone(lambda t: -t**3, -8.0, Bracket(0.0, 3.0))
        assert 0.0 <= x <= 3.0
        assert x == pytest.approx(2.0, abs=1e-10)


class TestIntegrate:
    def test_linear(self):
        assert integrate(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_empty_interval(self):
        assert integrate(math.sin, 1.3, 1.3) == 0.0

    def test_gamma_tail_integrand_vs_dense_trapezoid(self, row2):
        # Dense-trapezoid oracle for the power-exponential integrand at
        # gamma = 0.5 on the second parameter row.
        eb = row2.eta_bar
        gamma = 0.5
        lam = (-row2.eta - math.sqrt(row2.eta**2 + 2 * row2.sigma**2 * (row2.delta + gamma))) / row2.sigma**2
        alpha = (gamma + row2.delta) / gamma * (1.0 + row2.mu / (row2.sigma**2 * lam))
        expo = eb * (row2.delta + gamma) + 2.0

        def f(y):
            return math.exp(eb * gamma * y) / y**expo

        ys = np.linspace(1.0, alpha, 1_000_001)
        oracle = float(np.trapezoid(np.exp(eb * gamma * ys) / ys**expo, ys))
        est = integrate(f, 1.0, alpha)
        assert est == pytest.approx(oracle, rel=1e-8)

    def test_pdf_normalization(self):
        law = GammaLaw(shape=2.8, rate=1.7)
        hi = gamma_inv_cdf(law, 1.0 - 1e-12)
        total = integrate(lambda x: gamma_pdf(law, x), 0.0, hi)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_huge_range_power_decay(self):
        # The global-error refinement must cope with mass near the left end.
        val = integrate(lambda y: y**-2.42, 1.0, 5.0e5, rel_tol=1e-10)
        exact = (1.0 - (5.0e5) ** -1.42) / 1.42
        assert val == pytest.approx(exact, rel=1e-9)

    def test_non_finite_integrand_reports_abscissa(self):
        with pytest.raises(NumericalError) as err:
            integrate(lambda x: 1.0 / (x - 0.5), 0.0, 1.0)
        assert err.value.abscissa is not None

    def test_out_of_order_bounds(self):
        with pytest.raises(DomainError):
            integrate(lambda x: x, 1.0, 0.0)


class TestGammaLaw:
    def test_pdf_integer_shape_closed_form(self):
        law = GammaLaw(shape=2.0, rate=1.0)
        assert gamma_pdf(law, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
        for x in (0.3, 1.0, 4.2):
            assert gamma_pdf(law, x) == pytest.approx(x * math.exp(-x), rel=1e-13)

    def test_cdf_integer_shape_closed_form(self):
        # shape 2, rate 1: G(x) = 1 - e^-x (1 + x).
        law = GammaLaw(shape=2.0, rate=1.0)
        for x in (0.1, 1.0, 2.5, 10.0):
            assert gamma_cdf(law, x) == pytest.approx(
                1.0 - math.exp(-x) * (1.0 + x), abs=1e-10
            )
        assert gamma_cdf(law, 1.0) == pytest.approx(0.26424111765711533, abs=1e-12)

    def test_quantile_round_trip(self):
        law = GammaLaw(shape=2.0, rate=1.0)
        for x in (0.1, 1.0, 5.0):
            p = gamma_cdf(law, x)
            assert gamma_inv_cdf(law, p) == pytest.approx(x, abs=1e-9)

    def test_cdf_monotone_on_random_pairs(self):
        law = GammaLaw(shape=3.3, rate=0.8)
        rng = random.Random(99)
        for _ in range(200):
            x1 = rng.uniform(0.0, 20.0)
            x2 = rng.uniform(0.0, 20.0)
            if x1 > x2:
                x1, x2 = x2, x1
            assert gamma_cdf(law, x1) <= gamma_cdf(law, x2) + 1e-15

    def test_cdf_derivative_matches_pdf(self):
        law = GammaLaw(shape=2.6, rate=1.9)
        rng = random.Random(41)
        h = 1e-6
        for _ in range(100):
            x = rng.uniform(0.05, 8.0)
            fd = (gamma_cdf(law, x + h) - gamma_cdf(law, x - h)) / (2.0 * h)
            assert fd == pytest.approx(gamma_pdf(law, x), rel=1e-5)

    def test_cdf_limits(self):
        law = GammaLaw(shape=4.0, rate=2.0)
        assert gamma_cdf(law, 0.0) == 0.0
        assert gamma_cdf(law, 1e6) == pytest.approx(1.0, abs=1e-14)

    def test_invalid_arguments(self):
        law = GammaLaw(shape=2.0, rate=1.0)
        with pytest.raises(DomainError):
            gamma_inv_cdf(law, 1.5)
        with pytest.raises(DomainError):
            gamma_pdf(law, -0.1)
        with pytest.raises(DomainError):
            GammaLaw(shape=0.5, rate=1.0)


def test_expand_bracket_finds_sign_change(row1):
    br = expand_bracket(lambda g: fit_target(row1, g), lo=1e-8, hi=1.0)
    assert fit_target(row1, br.lo) * fit_target(row1, br.hi) <= 0.0


def test_bracket_requires_order():
    with pytest.raises(DomainError):
        Bracket(2.0, 1.0)
