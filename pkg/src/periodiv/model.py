"""Market parameters, characteristic roots, thresholds, and regime classification.

The solver's case analysis is driven by two comparisons: the reinsurance
loading ``mu`` against the premium loading ``eta`` (full-risk vs. retention
vs. cheap cover), and the dividend-decision intensity ``gamma`` against
branch-specific thresholds that decide whether a positive payout barrier
exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .errors import DomainError, NumericalError, RegimeError
from .numerics import Bracket, expand_bracket, find_root, integrate, quadratic_roots


@dataclass(frozen=True)
class ModelParams:
    """Market and contract constants.

    delta: discount rate (per unit time)
    sigma: diffusion volatility of the surplus (surplus / sqrt(time))
    mu:    reinsurer safety loading (dimensionless)
    eta:   insurer safety loading (dimensionless)
    """

    delta: float
    sigma: float
    mu: float
    eta: float

    def __post_init__(self) -> None:
        if not (self.delta > 0.0):
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not (self.sigma > 0.0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not (self.mu >= self.eta > 0.0):
            raise DomainError(
                f"loadings must satisfy mu >= eta > 0, got mu={self.mu}, eta={self.eta}"
            )

    @property
    def eta_bar(self) -> float:
        """2*sigma^2 / mu^2; the natural time scale of the retention region."""
        return 2.0 * self.sigma**2 / self.mu**2

    @property
    def is_cheap(self) -> bool:
        return self.mu == self.eta


@dataclass(frozen=True)
class CharRoots:
    """Roots of the characteristic quadratics of the surplus generator.

    theta_plus / theta_minus solve (sigma^2/2) r^2 + eta r - delta = 0;
    lambda_gamma is the negative root with delta replaced by delta + gamma.
    """

    theta_plus: float
    theta_minus: float
    lambda_gamma: float


def char_roots(params: ModelParams, gamma: float) -> CharRoots:
    if not (gamma > 0.0):
        raise DomainError(f"gamma must be positive, got {gamma}")
    half_s2 = 0.5 * params.sigma**2
    th_minus, th_plus = quadratic_roots(half_s2, params.eta, -params.delta)
    lam, _ = quadratic_roots(half_s2, params.eta, -(params.delta + gamma))
    return CharRoots(theta_plus=th_plus, theta_minus=th_minus, lambda_gamma=lam)


def lambda_radical(params: ModelParams, gamma: float) -> float:
    """The negative root written explicitly: (-eta - sqrt(eta^2 + 2 sigma^2 (delta+gamma))) / sigma^2."""
    s2 = params.sigma**2
    return (-params.eta - math.sqrt(params.eta**2 + 2.0 * s2 * (params.delta + gamma))) / s2


def fit_target(params: ModelParams, gamma: float) -> float:
    """Required value of h/h' at the payout barrier for the slope-one fit.

    Strictly increasing in gamma, from 1/theta_minus (gamma -> 0) to
    eta/delta (gamma -> infinity).  A positive barrier exists exactly when
    this target falls inside the range of the relevant ratio h/h'.
    """
    if not (gamma > 0.0):
        raise DomainError(f"gamma must be positive, got {gamma}")
    d, s2, eta = params.delta, params.sigma**2, params.eta
    return eta * gamma / (d * (d + gamma)) - s2 / (
        eta + math.sqrt(eta**2 + 2.0 * s2 * (d + gamma))
    )


@dataclass(frozen=True)
class HBasis:
    """h(x) = (a1 e^{th_p x} - a2 e^{th_m x}) / (th_p - th_m) and derivatives."""

    a1: float
    a2: float
    theta_plus: float
    theta_minus: float

    def h(self, x: float) -> float:
        n = self.theta_plus - self.theta_minus
        return (self.a1 * math.exp(self.theta_plus * x) - self.a2 * math.exp(self.theta_minus * x)) / n

    def dh(self, x: float) -> float:
        n = self.theta_plus - self.theta_minus
        return (
            self.a1 * self.theta_plus * math.exp(self.theta_plus * x)
            - self.a2 * self.theta_minus * math.exp(self.theta_minus * x)
        ) / n

    def d2h(self, x: float) -> float:
        n = self.theta_plus - self.theta_minus
        return (
            self.a1 * self.theta_plus**2 * math.exp(self.theta_plus * x)
            - self.a2 * self.theta_minus**2 * math.exp(self.theta_minus * x)
        ) / n

    def ratio(self, b: float) -> float:
        """h(b)/h'(b); strictly increasing, with limit 1/theta_plus at infinity."""
        if not (b > 0.0):
            raise DomainError(f"ratio requires b > 0, got {b}")
        return self.h(b) / self.dh(b)

    def invert_ratio(self, target: float, tol: float = 1e-12) -> float:
        """Solve h(b)/h'(b) = target for b > 0."""
        br = expand_bracket(lambda b: self.ratio(b) - target, lo=1e-10, hi=1.0)
        return find_root(lambda b: self.ratio(b) - target, br, tol=tol)


def theta_roots(params: ModelParams) -> tuple[float, float]:
    """(theta_minus, theta_plus) for the discounted generator at full risk."""
    return quadratic_roots(0.5 * params.sigma**2, params.eta, -params.delta)


def full_risk_basis(params: ModelParams) -> HBasis:
    """Basis with h(0) = 0; the value shape when full risk is optimal everywhere."""
    th_m, th_p = theta_roots(params)
    n = th_p - th_m
    return HBasis(a1=n, a2=n, theta_plus=th_p, theta_minus=th_m)


def retention_basis(params: ModelParams) -> HBasis:
    """Basis continuing the value above the retention switch level (eta < mu < 2 eta)."""
    if not (params.eta < params.mu < 2.0 * params.eta):
        raise RegimeError("retention basis requires eta < mu < 2*eta")
    th_m, th_p = theta_roots(params)
    k = (2.0 * params.eta - params.mu) / (2.0 * params.delta)
    return HBasis(a1=1.0 - th_m * k, a2=1.0 - th_p * k, theta_plus=th_p, theta_minus=th_m)


def cheap_basis(params: ModelParams) -> HBasis:
    """Basis continuing the value above the switch level under cheap cover (mu = eta)."""
    if not params.is_cheap:
        raise RegimeError("cheap basis requires mu == eta")
    th_m, th_p = theta_roots(params)
    q = 1.0 + params.delta * params.eta_bar
    xh = cheap_switch(params)
    slope = (params.delta * params.eta_bar / q) * xh ** (-1.0 / q)
    level = xh ** (params.delta * params.eta_bar / q)
    return HBasis(a1=slope - th_m * level, a2=slope - th_p * level, theta_plus=th_p, theta_minus=th_m)


def noncheap_constants(params: ModelParams) -> tuple[float, float, float, float]:
    """(q, c21, c22, x_bar) for the retention-region transform, eta < mu < 2 eta.

    q = 1 + delta*eta_bar; c21 and c22 are the transform scale and the
    switch-level constant; x_bar is the maximum-retention level.
    """
    if not (params.eta < params.mu < 2.0 * params.eta):
        raise RegimeError("retention-region constants require eta < mu < 2*eta")
    eb = params.eta_bar
    q = 1.0 + params.delta * eb
    c21 = eb * (params.mu - params.eta) / q
    c22 = (params.delta * eb * params.mu + 2.0 * params.eta - params.mu) / (
        2.0 * params.delta * eb * (params.mu - params.eta)
    )
    x_bar = (c21 / q) * math.log(c22) + eb * (2.0 * params.eta - params.mu) / (2.0 * q)
    return q, c21, c22, x_bar


def cheap_switch(params: ModelParams) -> float:
    """Maximum-retention level sigma^2 / (mu * (1 + delta*eta_bar)) under cheap cover."""
    if not params.is_cheap:
        raise RegimeError("cheap switch level requires mu == eta")
    return params.sigma**2 / (params.mu * (1.0 + params.delta * params.eta_bar))


def alpha_level(params: ModelParams, gamma: float) -> float:
    """Reciprocal slope at the switch level, ((gamma+delta)/gamma)(1 + mu/(sigma^2 lambda)).

    Positive whenever mu < 2*eta; decreasing in gamma and equal to 1 at the
    branch's barrier-existence threshold.
    """
    if not (params.mu < 2.0 * params.eta):
        raise RegimeError("switch-level abscissa requires mu < 2*eta")
    if not (gamma > 0.0):
        raise DomainError(f"gamma must be positive, got {gamma}")
    lam = lambda_radical(params, gamma)
    return (gamma + params.delta) / gamma * (1.0 + params.mu / (params.sigma**2 * lam))


def zero_barrier_lhs(params: ModelParams, gamma: float) -> float:
    """Integral side of the zero-barrier threshold equation (eta < mu < 2 eta)."""
    _require_noncheap_retention(params, gamma)
    eb = params.eta_bar
    alpha = alpha_level(params, gamma)
    expo = eb * (params.delta + gamma)
    head = params.sigma**2 * math.exp(eb * gamma * alpha) / (params.mu * alpha ** (expo + 1.0))
    tail = integrate(
        lambda y: math.exp(eb * gamma * y - (expo + 2.0) * math.log(y)), 1.0, alpha
    )
    return head + eb * (params.mu - params.eta) * tail


def zero_barrier_rhs(params: ModelParams, gamma: float) -> float:
    """Exponential side of the zero-barrier threshold equation."""
    _require_noncheap_retention(params, gamma)
    return params.eta_bar * (params.mu - params.eta) * math.exp(params.eta_bar * gamma)


def _require_noncheap_retention(params: ModelParams, gamma: float) -> None:
    if not (params.eta < params.mu < 2.0 * params.eta):
        raise RegimeError("operation requires eta < mu < 2*eta")
    g1 = thresholds(params).gamma1
    if not (0.0 < gamma < g1):
        raise RegimeError(f"gamma={gamma} outside (0, gamma1={g1})")


@dataclass(frozen=True)
class Thresholds:
    """Branch-relevant gamma thresholds; fields outside the branch are None."""

    gamma0: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    gamma_bar1: float | None = None


def _cross_checked_root(
    params: ModelParams, target: float, closed_form: float
) -> float:
    """Root of fit_target(gamma) = target, required to agree with the closed form."""
    f = lambda g: fit_target(params, g) - target
    br = expand_bracket(f, lo=1e-8, hi=1.0)
    root = find_root(f, br)
    if abs(root - closed_form) > 1e-8 * max(1.0, abs(closed_form)):
        raise NumericalError(
            f"threshold mismatch: closed form {closed_form} vs root {root}"
        )
    return closed_form


@lru_cache(maxsize=None)
def thresholds(params: ModelParams) -> Thresholds:
    """Regime thresholds for the (mu, eta) branch, memoized per parameter set.

    Each threshold available in closed form is additionally recomputed by
    root finding and the two must agree to 1e-8.
    """
    d, s2 = params.delta, params.sigma**2
    mu, eta = params.mu, params.eta
    if mu >= 2.0 * eta:
        g0 = 0.5 * (params.sigma * d / eta) ** 2
        return Thresholds(gamma0=_cross_checked_root(params, 0.0, g0))
    if mu > eta:
        g1 = (d / mu) * (2.0 * d * s2 / mu + 2.0 * eta - mu)
        g1 = _cross_checked_root(params, (2.0 * eta - mu) / (2.0 * d), g1)
        gap = lambda g: _zero_barrier_gap(params, g, g1)
        g2 = find_root(gap, Bracket(g1 * 1e-6, g1 * (1.0 - 1e-9)))
        return Thresholds(gamma1=g1, gamma2=g2)
    gb1 = (d / mu) * (2.0 * d * s2 / mu + mu)
    return Thresholds(gamma_bar1=_cross_checked_root(params, mu / (2.0 * d), gb1))


def _zero_barrier_gap(params: ModelParams, gamma: float, gamma1: float) -> float:
    # Inlined lhs - rhs, rescaled by a common exponential so extreme
    # 2*sigma^2/mu^2 values cannot overflow; the sign and root are unchanged.
    eb = params.eta_bar
    lam = lambda_radical(params, gamma)
    alpha = (gamma + params.delta) / gamma * (1.0 + params.mu / (params.sigma**2 * lam))
    expo2 = eb * (params.delta + gamma) + 2.0  # integrand decay exponent
    log_head = math.log(params.sigma**2 / params.mu) + eb * gamma * alpha - (
        expo2 - 1.0
    ) * math.log(alpha)
    log_b = math.log(eb * (params.mu - params.eta))
    phi_1 = eb * gamma  # integrand exponent at y = 1 (its maximum is at an endpoint)
    phi_a = eb * gamma * alpha - expo2 * math.log(alpha)
    scale = max(log_head, log_b + max(phi_1, phi_a), log_b + phi_1)
    tail = integrate(
        lambda y: math.exp(eb * gamma * y - expo2 * math.log(y) + log_b - scale),
        1.0,
        alpha,
    )
    return math.exp(log_head - scale) + tail - math.exp(log_b + phi_1 - scale)


class RegimeCase(str, Enum):
    A1 = "A1"  # mu >= 2*eta, positive barrier
    A2 = "A2"  # mu >= 2*eta, pay everything (b = 0)
    B1 = "B1"  # eta < mu < 2*eta, barrier above the switch level
    B2 = "B2"  # eta < mu < 2*eta, barrier below the switch level
    B3 = "B3"  # eta < mu < 2*eta, pay everything (b = 0)
    C1 = "C1"  # mu = eta, barrier above the switch level
    C2 = "C2"  # mu = eta, barrier below the switch level


@dataclass(frozen=True)
class Regime:
    case: RegimeCase
    thresholds: Thresholds


def classify(params: ModelParams, gamma: float) -> Regime:
    """Assign the analytic case for (params, gamma).

    A gamma exactly at a threshold goes to the lower case (the b = 0 or
    boundary-solution form), which is the continuous continuation of the
    family at that point.
    """
    if not (gamma > 0.0):
        raise DomainError(f"gamma must be positive, got {gamma}")
    th = thresholds(params)
    if params.mu >= 2.0 * params.eta:
        case = RegimeCase.A1 if gamma > th.gamma0 else RegimeCase.A2
    elif params.mu > params.eta:
        if gamma > th.gamma1:
            case = RegimeCase.B1
        elif gamma > th.gamma2:
            case = RegimeCase.B2
        else:
            case = RegimeCase.B3
    else:
        case = RegimeCase.C1 if gamma > th.gamma_bar1 else RegimeCase.C2
    return Regime(case=case, thresholds=th)
