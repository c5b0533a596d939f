"""Closed-form piecewise value functions, barriers, and switch levels.

Each regime's value function is assembled from analytic segments that carry
their own first and second derivatives.  The retention region (where the
optimal risk fraction is below one) is handled through a monotone change of
variables z = -ln v'(x); the two transform families used are an
exponential-affine map and a gamma-law integral map, both inverted by
safeguarded Newton iteration.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import DomainError, NumericalError, RegimeError
from .model import (
    HBasis,
    ModelParams,
    Regime,
    RegimeCase,
    alpha_level,
    char_roots,
    cheap_basis,
    cheap_switch,
    classify,
    fit_target,
    full_risk_basis,
    noncheap_constants,
    retention_basis,
    theta_roots,
    thresholds,
)
from .numerics import (
    _WG,
    _WGK,
    _XGK,
    Bracket,
    GammaLaw,
    find_root,
    gamma_cdf,
    gamma_inv_cdf,
    gamma_pdf,
    integrate,
)

_EXP_CLAMP = -50.0  # e^t for t below this is treated as 0 (tail of the lambda branch)
_DEGENERATE_WIDTH = 1e-13


def _safe_exp(t: float) -> float:
    return 0.0 if t < _EXP_CLAMP else math.exp(t)


# ---------------------------------------------------------------------------
# Gamma-law integral machinery
# ---------------------------------------------------------------------------


def hbeta(law: GammaLaw, beta: float, z: float) -> float:
    """Integral of 1/(y^2 g(y)) from e^{-beta} to z (g the law's density)."""
    w_lo = math.exp(-beta)
    if z < w_lo:
        raise DomainError(f"hbeta requires z >= e^-beta = {w_lo}, got {z}")
    return integrate(lambda y: _inv_y2g(law, y), w_lo, z)


def fbar(law: GammaLaw, beta: float, lead_coeff: float, risk_coeff: float, z: float) -> float:
    """The transform primitive built from the gamma law.

    fbar(z) = lead*(G(z) - G(e^-beta))
              - risk*(G(z)*H(z) - integral of G(y)/(y^2 g(y)))
    where H is `hbeta` and risk_coeff = eta_bar*(mu - eta) (zero for cheap
    cover, which collapses fbar to a pure cdf difference).
    """
    w_lo = math.exp(-beta)
    if z < w_lo:
        raise DomainError(f"fbar requires z >= e^-beta = {w_lo}, got {z}")
    head = lead_coeff * (gamma_cdf(law, z) - gamma_cdf(law, w_lo))
    if risk_coeff == 0.0:
        return head
    hz = hbeta(law, beta, z)
    nested = integrate(lambda y: gamma_cdf(law, y) * _inv_y2g(law, y), w_lo, z)
    return head - risk_coeff * (gamma_cdf(law, z) * hz - nested)


def _inv_y2g(law: GammaLaw, y: float) -> float:
    # 1/(y^2 g(y)) evaluated in log space.
    return math.exp(-(law.log_norm + (law.shape + 1.0) * math.log(y) - law.rate * y))


class GammaIntegrals:
    """Panelized cumulative integrals of 1/(y^2 g) and G/(y^2 g) on [w_lo, w_hi].

    Point queries combine the prefix sums with one Kronrod panel over the
    residual sub-interval; the two integrals share integrand evaluations.
    """

    def __init__(self, law: GammaLaw, w_lo: float, w_hi: float, n_panels: int = 512):
        if not (w_lo < w_hi):
            raise DomainError(f"integral cache requires w_lo < w_hi, got [{w_lo}, {w_hi}]")
        self.law = law
        self.w_lo = w_lo
        self.w_hi = w_hi
        step = (w_hi - w_lo) / n_panels
        self.nodes = [w_lo + i * step for i in range(n_panels)] + [w_hi]
        prefix_h = [0.0]
        prefix_j = [0.0]
        for i in range(n_panels):
            ih, ij = self._panel(self.nodes[i], self.nodes[i + 1], 0)
            prefix_h.append(prefix_h[-1] + ih)
            prefix_j.append(prefix_j[-1] + ij)
        self.prefix_h = prefix_h
        self.prefix_j = prefix_j

    def _panel(self, a: float, b: float, depth: int) -> tuple[float, float]:
        ih, ij, err = _gk15_pair(self.law, a, b)
        scale = max(abs(ih), abs(ij), 1e-300)
        if err <= 1e-12 * scale or depth >= 10:
            return ih, ij
        m = 0.5 * (a + b)
        lh, lj = self._panel(a, m, depth + 1)
        rh, rj = self._panel(m, b, depth + 1)
        return lh + rh, lj + rj

    def h_at(self, w: float) -> float:
        return self._query(w, self.prefix_h, 0)

    def j_at(self, w: float) -> float:
        return self._query(w, self.prefix_j, 1)

    def both_at(self, w: float) -> tuple[float, float]:
        return self._query(w, self.prefix_h, 0), self._query(w, self.prefix_j, 1)

    def _query(self, w: float, prefix: list[float], which: int) -> float:
        if not (self.w_lo - 1e-12 <= w <= self.w_hi + 1e-12):
            raise DomainError(f"query {w} outside cached range [{self.w_lo}, {self.w_hi}]")
        w = min(max(w, self.w_lo), self.w_hi)
        k = bisect_left(self.nodes, w) - 1
        k = min(max(k, 0), len(self.nodes) - 2)
        ih, ij, _ = _gk15_pair(self.law, self.nodes[k], w)
        return prefix[k] + (ih if which == 0 else ij)


def _gk15_pair(law: GammaLaw, a: float, b: float) -> tuple[float, float, float]:
    """Kronrod-15 for (1/(y^2 g), G/(y^2 g)) on [a, b] with a shared error bound."""
    if a == b:
        return 0.0, 0.0, 0.0
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    kron_h = kron_j = gauss_h = gauss_j = 0.0
    for j in range(8):
        pts = (mid,) if j == 7 else (mid - half * _XGK[j], mid + half * _XGK[j])
        fh = fj = 0.0
        for x in pts:
            base = _inv_y2g(law, x)
            fh += base
            fj += base * gamma_cdf(law, x)
        kron_h += _WGK[j] * fh
        kron_j += _WGK[j] * fj
        if j % 2 == 1:  # Gauss nodes, the centre point (j = 7) included
            gauss_h += _WG[j // 2] * fh
            gauss_j += _WG[j // 2] * fj
    kron_h *= half
    kron_j *= half
    gauss_h *= half
    gauss_j *= half
    err = max(abs(kron_h - gauss_h), abs(kron_j - gauss_j))
    return kron_h, kron_j, err


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HSegment:
    """v = c * h(x - x_off) for an HBasis h."""

    lo: float
    hi: float
    c: float
    basis: HBasis
    x_off: float = 0.0

    def triple(self, x: float) -> tuple[float, float, float]:
        t = x - self.x_off
        return (
            self.c * self.basis.h(t),
            self.c * self.basis.dh(t),
            self.c * self.basis.d2h(t),
        )

    def u_star(self, x: float) -> float:
        return 1.0


@dataclass(frozen=True)
class ExpLinearSegment:
    """v = amp * e^{lam (x - x_ref)} + slope * x + level."""

    lo: float
    hi: float
    amp: float
    lam: float
    x_ref: float
    slope: float
    level: float

    def triple(self, x: float) -> tuple[float, float, float]:
        e = _safe_exp(self.lam * (x - self.x_ref))
        ae = self.amp * e
        return (
            ae + self.slope * x + self.level,
            ae * self.lam + self.slope,
            ae * self.lam * self.lam,
        )

    def u_star(self, x: float) -> float:
        return 1.0


@dataclass(frozen=True)
class LinearSegment:
    lo: float
    hi: float
    slope: float
    level: float

    def triple(self, x: float) -> tuple[float, float, float]:
        return self.slope * x + self.level, self.slope, 0.0

    def u_star(self, x: float) -> float:
        return 1.0


@dataclass(frozen=True)
class PowerSegment:
    """v = coeff * x^p with 0 < p < 1 (cheap-cover retention region)."""

    lo: float
    hi: float
    coeff: float
    p: float
    u_slope: float  # d(u*)/dx = (mu/sigma^2)(1 + delta*eta_bar)

    def triple(self, x: float) -> tuple[float, float, float]:
        v = self.coeff * x**self.p
        return v, self.p * v / x, self.p * (self.p - 1.0) * v / (x * x)

    def u_star(self, x: float) -> float:
        return self.u_slope * x


@dataclass(frozen=True)
class AffineTransformSegment:
    """Retention region mapped through x1(z) = k1 e^{q(z+m)} + c21 z + k22.

    v(x) = c21 e^{-z} (e^{q(m+z)} - 1) at z = x1^{-1}(x); v' = e^{-z} and
    v'' = -e^{-z}/x1'(z).
    """

    lo: float
    hi: float
    c21: float
    m: float
    q: float
    z_lo: float
    z_hi: float
    mu_over_s2: float

    @property
    def k1(self) -> float:
        return (self.q - 1.0) * self.c21 / self.q  # delta*eta_bar*c21/q

    def forward(self, z: float) -> float:
        k22 = self.c21 * (self.m - (self.q - 1.0) / self.q)
        return self.k1 * math.exp(self.q * (z + self.m)) + self.c21 * z + k22

    def forward_deriv(self, z: float) -> float:
        return self.k1 * self.q * math.exp(self.q * (z + self.m)) + self.c21

    def inverse(self, x: float) -> float:
        lo, hi = self.z_lo, self.z_hi
        z = 0.5 * (lo + hi)
        for _ in range(100):
            fx = self.forward(z) - x
            if abs(fx) <= 1e-14 * max(1.0, abs(x)):
                break
            if fx > 0.0:
                hi = z
            else:
                lo = z
            step = fx / self.forward_deriv(z)
            z_new = z - step
            if not (lo < z_new < hi):
                z_new = 0.5 * (lo + hi)
            if abs(z_new - z) < 1e-16 * max(1.0, abs(z)):
                z = z_new
                break
            z = z_new
        return min(max(z, self.z_lo), self.z_hi)

    def triple(self, x: float) -> tuple[float, float, float]:
        z = self.inverse(x)
        ez = math.exp(-z)
        v = self.c21 * ez * (math.exp(self.q * (self.m + z)) - 1.0)
        return v, ez, -ez / self.forward_deriv(z)

    def u_star(self, x: float) -> float:
        return self.mu_over_s2 * self.forward_deriv(self.inverse(x))


@dataclass
class GammaTransformSegment:
    """Retention region mapped through x2(z) = fbar(e^z) + b_off.

    v(x) = e^{-z}/(delta+gamma) * { w g(w)/eta_bar * (k3 - risk*H(w)) - (mu-eta) }
           + gamma/(delta+gamma) * (v_b + x - b_off),   w = e^z.
    """

    lo: float
    hi: float
    law: GammaLaw
    cache: GammaIntegrals
    k3: float
    risk: float  # eta_bar*(mu - eta)
    eta_bar: float
    mu_minus_eta: float
    delta_plus_gamma: float
    gamma: float
    v_b: float
    b_off: float
    mu_over_s2: float
    _node_x: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        # Forward map at the cache nodes, for inversion bracketing.
        g_lo = gamma_cdf(self.law, self.cache.w_lo)
        xs = []
        for k, w in enumerate(self.cache.nodes):
            gw = gamma_cdf(self.law, w)
            h = self.cache.prefix_h[k]
            j = self.cache.prefix_j[k]
            fb = self.k3 * (gw - g_lo) - self.risk * (gw * h - j)
            xs.append(fb + self.b_off)
        self._node_x = xs

    def forward(self, z: float) -> float:
        w = math.exp(z)
        g_lo = gamma_cdf(self.law, self.cache.w_lo)
        gw = gamma_cdf(self.law, w)
        h, j = self.cache.both_at(w)
        return self.k3 * (gw - g_lo) - self.risk * (gw * h - j) + self.b_off

    def forward_deriv(self, z: float) -> float:
        # dx/dz = w g(w) (k3 - risk*H(w))
        w = math.exp(z)
        return w * gamma_pdf(self.law, w) * (self.k3 - self.risk * self.cache.h_at(w))

    def inverse(self, x: float) -> float:
        k = min(max(bisect_left(self._node_x, x) - 1, 0), len(self._node_x) - 2)
        lo = math.log(self.cache.nodes[k])
        hi = math.log(self.cache.nodes[k + 1])
        z = 0.5 * (lo + hi)
        for _ in range(100):
            fx = self.forward(z) - x
            if abs(fx) <= 1e-14 * max(1.0, abs(x)):
                break
            if fx > 0.0:
                hi = z
            else:
                lo = z
            d = self.forward_deriv(z)
            z_new = z - fx / d if d > 0.0 else 0.5 * (lo + hi)
            if not (lo < z_new < hi):
                z_new = 0.5 * (lo + hi)
            if abs(z_new - z) < 1e-16 * max(1.0, abs(z)):
                z = z_new
                break
            z = z_new
        z_min = math.log(self.cache.w_lo)
        z_max = math.log(self.cache.w_hi)
        return min(max(z, z_min), z_max)

    def triple(self, x: float) -> tuple[float, float, float]:
        z = self.inverse(x)
        w = math.exp(z)
        gw = gamma_pdf(self.law, w)
        hw = self.cache.h_at(w)
        core = w * gw / self.eta_bar * (self.k3 - self.risk * hw) - self.mu_minus_eta
        v = core / (w * self.delta_plus_gamma) + (
            self.gamma / self.delta_plus_gamma
        ) * (self.v_b + x - self.b_off)
        v1 = 1.0 / w
        deriv = w * gw * (self.k3 - self.risk * hw)
        v2 = -(1.0 / w) / deriv
        return v, v1, v2

    def u_star(self, x: float) -> float:
        z = self.inverse(x)
        return self.mu_over_s2 * self.forward_deriv(z)


@dataclass(frozen=True)
class GammaQuantileSegment:
    """Cheap-cover retention region between barrier and switch level.

    w(x) = G^{-1}((x - b)/c51 + G(e^{-M2})); v' = 1/w.
    """

    lo: float
    hi: float
    law: GammaLaw
    c51: float
    g_at_lo: float  # G(e^{-M2})
    v_b: float
    b_off: float
    eta_bar: float
    delta_plus_gamma: float
    gamma: float
    mu_over_s2: float
    w_max: float

    def quantile_arg(self, x: float) -> float:
        w = gamma_inv_cdf(self.law, min(self.g_at_lo + (x - self.b_off) / self.c51, 1.0 - 1e-16))
        return min(w, self.w_max)

    def triple(self, x: float) -> tuple[float, float, float]:
        w = self.quantile_arg(x)
        gw = gamma_pdf(self.law, w)
        v = (self.c51 / self.eta_bar * gw + self.gamma * (self.v_b + x - self.b_off)) / (
            self.delta_plus_gamma
        )
        return v, 1.0 / w, -1.0 / (self.c51 * w * w * gw)

    def u_star(self, x: float) -> float:
        w = self.quantile_arg(x)
        return self.mu_over_s2 * self.c51 * w * gamma_pdf(self.law, w)


Segment = (
    HSegment
    | ExpLinearSegment
    | LinearSegment
    | PowerSegment
    | AffineTransformSegment
    | GammaTransformSegment
    | GammaQuantileSegment
)


# ---------------------------------------------------------------------------
# Solution container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    """A constructed value function with its barrier and switch level."""

    params: ModelParams
    gamma: float
    regime: Regime
    b: float
    x_switch: float
    segments: tuple[Segment, ...]
    constants: dict[str, float]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(s.hi for s in self.segments[:-1])

    def segment_at(self, x: float) -> Segment:
        # Half-open [lo, hi); an x exactly at a breakpoint evaluates on the
        # lower segment (left limit).
        his = [s.hi for s in self.segments[:-1]]
        return self.segments[bisect_left(his, x)]

    def eval(self, x: float) -> tuple[float, float, float]:
        if not (x > 0.0):
            raise DomainError(f"value function is defined for x > 0, got {x}")
        return self.segment_at(x).triple(x)

    def value(self, x: float) -> float:
        return self.eval(x)[0]

    def u_star(self, x: float) -> float:
        if not (x > 0.0):
            raise DomainError(f"retention is defined for x > 0, got {x}")
        if x >= self.x_switch:
            return 1.0
        return self.segment_at(x).u_star(x)


def eval_solution(sol: Solution, x: float) -> tuple[float, float, float]:
    """(v, v', v'') at x; left limits at exact breakpoints."""
    return sol.eval(x)


def _assemble(
    params: ModelParams,
    gamma: float,
    regime: Regime,
    b: float,
    x_switch: float,
    segments: list[Segment],
    constants: dict[str, float],
) -> Solution:
    kept = [s for s in segments if s.hi - s.lo > _DEGENERATE_WIDTH]
    if not kept:
        raise NumericalError("no non-degenerate segments assembled")
    return Solution(
        params=params,
        gamma=gamma,
        regime=regime,
        b=b,
        x_switch=x_switch,
        segments=tuple(kept),
        constants=constants,
    )


def _top_segment(
    lo: float,
    amp: float,
    lam: float,
    x_ref: float,
    gamma: float,
    delta: float,
    eta: float,
    v_b: float,
    b: float,
) -> ExpLinearSegment:
    # amp e^{lam (x - x_ref)} + gamma/(gamma+delta) [x - b + v_b + eta/(gamma+delta)]
    w = gamma / (gamma + delta)
    return ExpLinearSegment(
        lo=lo,
        hi=math.inf,
        amp=amp,
        lam=lam,
        x_ref=x_ref,
        slope=w,
        level=w * (v_b - b + eta / (gamma + delta)),
    )


# ---------------------------------------------------------------------------
# Case builders
# ---------------------------------------------------------------------------


def build_A1(params: ModelParams, gamma: float, b: float) -> Solution:
    """Full-risk case with a positive payout barrier (mu >= 2*eta)."""
    if not (params.mu >= 2.0 * params.eta):
        raise RegimeError("builder requires mu >= 2*eta")
    if not (b > 0.0):
        raise DomainError("positive-barrier builder needs b > 0; use the b=0 form")
    roots = char_roots(params, gamma)
    lam = roots.lambda_gamma
    basis = full_risk_basis(params)
    d, g = params.delta, gamma
    denom = basis.dh(b) - d * lam / (g + d) * basis.h(b)
    c11 = (g / (g + d)) * (1.0 - params.eta * lam / (g + d)) / denom
    v_b = c11 * basis.h(b)
    c12 = (d * v_b - g * params.eta / (g + d)) / (g + d)
    segments: list[Segment] = [
        HSegment(lo=0.0, hi=b, c=c11, basis=basis),
        _top_segment(b, c12, lam, b, g, d, params.eta, v_b, b),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        b,
        0.0,
        segments,
        {"c11": c11, "c12": c12, "lambda": lam, "v_b": v_b},
    )


def build_A2(params: ModelParams, gamma: float) -> Solution:
    """Full-risk case paying out the whole surplus at each decision time (b = 0)."""
    if not (params.mu >= 2.0 * params.eta):
        raise RegimeError("builder requires mu >= 2*eta")
    lam = char_roots(params, gamma).lambda_gamma
    d, g = params.delta, gamma
    amp = -g * params.eta / (g + d) ** 2
    seg = ExpLinearSegment(
        lo=0.0,
        hi=math.inf,
        amp=amp,
        lam=lam,
        x_ref=0.0,
        slope=g / (g + d),
        level=g * params.eta / (g + d) ** 2,
    )
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        0.0,
        0.0,
        [seg],
        {"lambda": lam, "amp": amp},
    )


def build_B1(params: ModelParams, gamma: float, b: float) -> Solution:
    """Retention case with the barrier above the switch level (eta < mu < 2*eta)."""
    q, c21, c22, x_bar = noncheap_constants(params)
    if not (b > x_bar):
        raise DomainError(
            f"barrier {b} must exceed the switch level {x_bar}; use the low-barrier builders"
        )
    lam = char_roots(params, gamma).lambda_gamma
    basis = retention_basis(params)
    d, g = params.delta, gamma
    num = g / (g + d) - lam * params.eta * g / (d + g) ** 2
    den = c22 ** (-1.0 / q) * (basis.dh(b - x_bar) - lam * d / (d + g) * basis.h(b - x_bar))
    m = math.log(num / den)
    c_mid = math.exp(m) * c22 ** (-1.0 / q)
    v_b = c_mid * basis.h(b - x_bar)
    c23 = math.exp(m) * d * c22 ** (-1.0 / q) / (d + g) * basis.h(b - x_bar) - params.eta * g / (
        d + g
    ) ** 2
    z_hi = math.log(c22) / q - m
    lower = AffineTransformSegment(
        lo=0.0,
        hi=x_bar,
        c21=c21,
        m=m,
        q=q,
        z_lo=-m,
        z_hi=z_hi,
        mu_over_s2=params.mu / params.sigma**2,
    )
    segments: list[Segment] = [
        lower,
        HSegment(lo=x_bar, hi=b, c=c_mid, basis=basis, x_off=x_bar),
        _top_segment(b, c23, lam, b, g, d, params.eta, v_b, b),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        b,
        x_bar,
        segments,
        {"M": m, "c23": c23, "lambda": lam, "x_bar": x_bar, "c21": c21, "c22": c22, "v_b": v_b},
    )


def _gamma_law(params: ModelParams, gamma: float) -> GammaLaw:
    eb = params.eta_bar
    return GammaLaw(shape=eb * (params.delta + gamma) + 1.0, rate=gamma * eb)


def _c31(params: ModelParams, gamma: float, law: GammaLaw, alpha: float, beta: float) -> float:
    """Lead coefficient sigma^2/(mu alpha g(alpha)) + eta_bar (mu-eta) H_beta(alpha)."""
    head = params.sigma**2 / (params.mu * alpha * gamma_pdf(law, alpha))
    risk = params.eta_bar * (params.mu - params.eta)
    if risk == 0.0:
        return head
    return head + risk * hbeta(law, beta, alpha)


def _gbar(params: ModelParams, gamma: float, law: GammaLaw, alpha: float, beta: float) -> float:
    """Decreasing map whose level sets pin the low-barrier slope constant."""
    _, c21, _, _ = noncheap_constants(params)
    eb = params.eta_bar
    w = math.exp(-beta)
    f6 = w * gamma_pdf(law, w) * _c31(params, gamma, law, alpha, beta) / c21
    if f6 <= 1.0:
        return -math.inf
    return f6 + math.log((f6 - 1.0) / (params.delta * eb))


def build_B2(params: ModelParams, gamma: float, b: float | None = None) -> Solution:
    """Retention case with the barrier below the switch level (eta < mu < 2*eta).

    With b omitted the optimal barrier is used (slope one at the barrier);
    an explicit b must lie in (0, b_opt], the domain on which the slope
    constant M2 >= 0 exists.
    """
    q, c21, c22, x_bar = noncheap_constants(params)
    th = thresholds(params)
    if not (th.gamma2 <= gamma <= th.gamma1):
        raise RegimeError(
            f"low-barrier builder requires gamma in [{th.gamma2}, {th.gamma1}], got {gamma}"
        )
    d, g = params.delta, gamma
    eb = params.eta_bar
    lam = char_roots(params, gamma).lambda_gamma
    alpha = alpha_level(params, gamma)
    law = _gamma_law(params, gamma)
    risk = eb * (params.mu - params.eta)

    c31_0 = _c31(params, gamma, law, alpha, 0.0)
    arg = gamma_pdf(law, 1.0) * c31_0 / c21 - 1.0
    if arg <= 0.0:
        raise NumericalError("positive-slope constant does not exist at this gamma")
    m_gamma_opt = math.log(arg / (d * eb)) / q
    b_opt = c21 * ((d * eb / q) * (math.exp(m_gamma_opt * q) - 1.0) + m_gamma_opt)

    if b is None or abs(b - b_opt) <= 1e-12 * max(1.0, b_opt):
        b_eff, m2, m_gamma = b_opt, 0.0, m_gamma_opt
        k3 = c31_0
    else:
        if not (0.0 < b < b_opt):
            raise DomainError(f"barrier {b} outside the admissible range (0, {b_opt}]")
        target = q * (1.0 + b / c21)
        gb = lambda beta: _gbar(params, gamma, law, alpha, beta) - target
        hi = 1e-4
        while gb(hi) > 0.0:
            hi *= 2.0
            if hi > 1e3:
                raise NumericalError("slope-constant bracket expansion failed")
        m2 = find_root(gb, Bracket(1e-10, hi))
        w2 = math.exp(-m2)
        c31_m2 = _c31(params, gamma, law, alpha, m2)
        m_gamma = (
            math.log((w2 * gamma_pdf(law, w2) * c31_m2 / c21 - 1.0) / (d * eb)) / q + m2
        )
        b_eff, k3 = b, c31_m2

    w_lo = math.exp(-m2)
    cache = GammaIntegrals(law, w_lo, alpha)
    v_b = c21 * math.exp(m2) * (math.exp(q * (m_gamma - m2)) - 1.0)
    mid = GammaTransformSegment(
        lo=b_eff,
        hi=0.0,  # patched below once the switch level is known
        law=law,
        cache=cache,
        k3=k3,
        risk=risk,
        eta_bar=eb,
        mu_minus_eta=params.mu - params.eta,
        delta_plus_gamma=d + g,
        gamma=g,
        v_b=v_b,
        b_off=b_eff,
        mu_over_s2=params.mu / params.sigma**2,
    )
    x_b = mid._node_x[-1]
    mid.hi = x_b
    c32 = -params.mu / (params.sigma**2 * alpha * lam**2)
    lower = AffineTransformSegment(
        lo=0.0,
        hi=b_eff,
        c21=c21,
        m=m_gamma,
        q=q,
        z_lo=-m_gamma,
        z_hi=-m2,
        mu_over_s2=params.mu / params.sigma**2,
    )
    segments: list[Segment] = [
        lower,
        mid,
        _top_segment(x_b, c32, lam, x_b, g, d, params.eta, v_b, b_eff),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        b_eff,
        x_b,
        segments,
        {
            "M": m_gamma,
            "M2": m2,
            "alpha": alpha,
            "c31": k3,
            "c32": c32,
            "lambda": lam,
            "b_opt": b_opt,
            "v_b": v_b,
        },
    )


def build_B3(params: ModelParams, gamma: float) -> Solution:
    """Retention case paying out the whole surplus (b = 0, eta < mu < 2*eta)."""
    th = thresholds(params)
    if th.gamma2 is None or not (0.0 < gamma <= th.gamma2):
        raise RegimeError(f"zero-barrier builder requires gamma in (0, gamma2], got {gamma}")
    d, g = params.delta, gamma
    eb = params.eta_bar
    lam = char_roots(params, gamma).lambda_gamma
    alpha = alpha_level(params, gamma)
    law = _gamma_law(params, gamma)
    risk = eb * (params.mu - params.eta)

    def slope_gap(m: float) -> float:
        # Both sides are positive, so compare in log space; this survives
        # parameter corners where the density under- or overflows.
        em = math.exp(m)
        log_lhs = math.log(params.mu - params.eta) - m - (
            law.log_norm + (law.shape - 1.0) * m - law.rate * em
        )
        r1 = math.log(0.5 * params.mu / alpha) - (
            law.log_norm + (law.shape - 1.0) * math.log(alpha) - law.rate * alpha
        )
        h = hbeta(law, -m, alpha)
        r2 = math.log((params.mu - params.eta) * h) if h > 0.0 else -math.inf
        hi = max(r1, r2)
        log_rhs = hi + math.log(math.exp(r1 - hi) + math.exp(r2 - hi))
        return log_lhs - log_rhs

    z_max = math.log(alpha)
    if slope_gap(1e-12) <= 0.0:
        # Exactly at the gamma2 boundary the slope constant degenerates to 0.
        m_gamma = 0.0
    else:
        m_gamma = find_root(slope_gap, Bracket(1e-12, z_max * (1.0 - 1e-12)))
    w_lo = math.exp(m_gamma)
    k3 = eb * (params.mu - params.eta) / (w_lo * gamma_pdf(law, w_lo))
    cache = GammaIntegrals(law, w_lo, alpha)
    mid = GammaTransformSegment(
        lo=0.0,
        hi=0.0,
        law=law,
        cache=cache,
        k3=k3,
        risk=risk,
        eta_bar=eb,
        mu_minus_eta=params.mu - params.eta,
        delta_plus_gamma=d + g,
        gamma=g,
        v_b=0.0,
        b_off=0.0,
        mu_over_s2=params.mu / params.sigma**2,
    )
    x0 = mid._node_x[-1]
    mid.hi = x0
    c32 = -params.mu / (params.sigma**2 * alpha * lam**2)
    segments: list[Segment] = [
        mid,
        _top_segment(x0, c32, lam, x0, g, d, params.eta, 0.0, 0.0),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        0.0,
        x0,
        segments,
        {"M": m_gamma, "alpha": alpha, "c33": k3, "c32": c32, "lambda": lam},
    )


def build_C1(params: ModelParams, gamma: float, b: float) -> Solution:
    """Cheap-cover case with the barrier above the switch level (mu = eta)."""
    if not params.is_cheap:
        raise RegimeError("builder requires mu == eta")
    x_hat = cheap_switch(params)
    if not (b > x_hat):
        raise DomainError(f"barrier {b} must exceed the switch level {x_hat}")
    q = 1.0 + params.delta * params.eta_bar
    lam = char_roots(params, gamma).lambda_gamma
    basis = cheap_basis(params)
    d, g = params.delta, gamma
    num = g / (g + d) - params.mu * g * lam / (d + g) ** 2
    den = basis.dh(b - x_hat) - lam * d / (g + d) * basis.h(b - x_hat)
    c41 = num / den
    v_b = c41 * basis.h(b - x_hat)
    c42 = d / (d + g) * v_b - params.mu * g / (d + g) ** 2
    p = d * params.eta_bar / q
    segments: list[Segment] = [
        PowerSegment(
            lo=0.0, hi=x_hat, coeff=c41, p=p, u_slope=params.mu / params.sigma**2 * q
        ),
        HSegment(lo=x_hat, hi=b, c=c41, basis=basis, x_off=x_hat),
        _top_segment(b, c42, lam, b, g, d, params.mu, v_b, b),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        b,
        x_hat,
        segments,
        {"c41": c41, "c42": c42, "lambda": lam, "x_hat": x_hat, "v_b": v_b},
    )


def build_C2(params: ModelParams, gamma: float, b: float | None = None) -> Solution:
    """Cheap-cover case with the barrier below the switch level (mu = eta).

    With b omitted the optimal barrier c51 g(1)/(1 + delta*eta_bar) is used.
    """
    if not params.is_cheap:
        raise RegimeError("builder requires mu == eta")
    d, g = params.delta, gamma
    eb = params.eta_bar
    q = 1.0 + d * eb
    lam = char_roots(params, gamma).lambda_gamma
    alpha = alpha_level(params, gamma)
    law = _gamma_law(params, gamma)
    c51 = params.sigma**2 / (params.mu * alpha * gamma_pdf(law, alpha))
    b_opt = c51 * gamma_pdf(law, 1.0) / q

    if b is None or abs(b - b_opt) <= 1e-12 * max(1.0, b_opt):
        b_eff, m2 = b_opt, 0.0
    else:
        if not (0.0 < b < b_opt):
            raise DomainError(f"barrier {b} outside the admissible range (0, {b_opt}]")
        target = b * q / c51

        def wg_gap(beta: float) -> float:
            w = math.exp(-beta)
            return w * gamma_pdf(law, w) - target

        hi = 1.0
        while wg_gap(hi) > 0.0:
            hi *= 2.0
            if hi > 1e3:
                raise NumericalError("slope-constant bracket expansion failed")
        b_eff, m2 = b, find_root(wg_gap, Bracket(0.0, hi))

    w_lo = math.exp(-m2)
    g_lo = gamma_cdf(law, w_lo)
    if g_lo < 1e-300 or b_eff <= 0.0:
        # The quantile map behind the middle branch cannot be resolved once
        # the cdf at the barrier falls into the subnormal range.
        raise NumericalError(
            "barrier scale below double-precision resolution for these parameters"
        )
    x_b = c51 * (gamma_cdf(law, alpha) - g_lo) + b_eff
    v_b = q * math.exp(m2) * b_eff / (d * eb)
    coeff = q * math.exp(m2) * b_eff ** (1.0 / q) / (d * eb)
    c32 = -params.mu / (params.sigma**2 * alpha * lam**2)
    p = d * eb / q
    segments: list[Segment] = [
        PowerSegment(
            lo=0.0, hi=b_eff, coeff=coeff, p=p, u_slope=params.mu / params.sigma**2 * q
        ),
        GammaQuantileSegment(
            lo=b_eff,
            hi=x_b,
            law=law,
            c51=c51,
            g_at_lo=g_lo,
            v_b=v_b,
            b_off=b_eff,
            eta_bar=eb,
            delta_plus_gamma=d + g,
            gamma=g,
            mu_over_s2=params.mu / params.sigma**2,
            w_max=alpha,
        ),
        _top_segment(x_b, c32, lam, x_b, g, d, params.mu, v_b, b_eff),
    ]
    return _assemble(
        params,
        gamma,
        classify(params, gamma),
        b_eff,
        x_b,
        segments,
        {
            "M2": m2,
            "alpha": alpha,
            "c51": c51,
            "c32": c32,
            "lambda": lam,
            "b_opt": b_opt,
            "v_b": v_b,
        },
    )


# ---------------------------------------------------------------------------
# Dispatchers
# ---------------------------------------------------------------------------


def solve(params: ModelParams, gamma: float) -> Solution:
    """The optimal-barrier solution for the classified regime."""
    regime = classify(params, gamma)
    case = regime.case
    if case is RegimeCase.A1:
        b = full_risk_basis(params).invert_ratio(fit_target(params, gamma))
        return build_A1(params, gamma, b)
    if case is RegimeCase.A2:
        return build_A2(params, gamma)
    if case is RegimeCase.B1:
        _, _, _, x_bar = noncheap_constants(params)
        b = x_bar + retention_basis(params).invert_ratio(fit_target(params, gamma))
        return build_B1(params, gamma, b)
    if case is RegimeCase.B2:
        return build_B2(params, gamma)
    if case is RegimeCase.B3:
        return build_B3(params, gamma)
    if case is RegimeCase.C1:
        b = cheap_switch(params) + cheap_basis(params).invert_ratio(fit_target(params, gamma))
        return build_C1(params, gamma, b)
    return build_C2(params, gamma)


def solve_with_barrier(params: ModelParams, gamma: float, b: float) -> Solution:
    """The value function of the (possibly sub-optimal) barrier-b strategy.

    Raises DomainError when no construction covers the requested barrier at
    this gamma; callers sweeping b should skip those points.
    """
    if b < 0.0:
        raise DomainError(f"barrier must be nonnegative, got {b}")
    if params.mu >= 2.0 * params.eta:
        return build_A2(params, gamma) if b == 0.0 else build_A1(params, gamma, b)
    if params.mu > params.eta:
        th = thresholds(params)
        _, _, _, x_bar = noncheap_constants(params)
        if b == 0.0:
            if gamma <= th.gamma2:
                return build_B3(params, gamma)
            raise DomainError("b = 0 is only constructible for gamma <= gamma2")
        if b > x_bar:
            return build_B1(params, gamma, b)
        if th.gamma2 < gamma <= th.gamma1:
            return build_B2(params, gamma, b)
        raise DomainError(
            f"barrier {b} below the switch level is not constructible at gamma={gamma}"
        )
    x_hat = cheap_switch(params)
    if b > x_hat:
        return build_C1(params, gamma, b)
    if b > 0.0:
        return build_C2(params, gamma, b)
    raise DomainError("b = 0 admits no cheap-cover construction")


# ---------------------------------------------------------------------------
# Singular-control limits (gamma -> infinity)
# ---------------------------------------------------------------------------


def asymptotic(params: ModelParams, branch: str) -> Solution:
    """The gamma -> infinity value function and barrier for branch 'A', 'B', or 'C'.

    The top segment is exactly linear with slope one; dividends there are
    paid continuously in the limit.
    """
    branch = branch.upper()
    th_m, th_p = theta_roots(params)
    d, eta = params.delta, params.eta
    if branch == "A":
        if not (params.mu >= 2.0 * params.eta):
            raise RegimeError("branch A requires mu >= 2*eta")
        basis = full_risk_basis(params)
        b_inf = math.log((d - eta * th_m) / (d - eta * th_p)) / (th_p - th_m)
        c = 1.0 / basis.dh(b_inf)
        v_binf = c * basis.h(b_inf)
        segments: list[Segment] = [
            HSegment(lo=0.0, hi=b_inf, c=c, basis=basis),
            LinearSegment(lo=b_inf, hi=math.inf, slope=1.0, level=v_binf - b_inf),
        ]
        regime = Regime(RegimeCase.A1, thresholds(params))
        return _assemble(params, math.inf, regime, b_inf, 0.0, segments,
                         {"b_inf": b_inf, "v_b_inf": v_binf})
    if branch == "B":
        q, c21, c22, x_bar = noncheap_constants(params)
        basis = retention_basis(params)
        b_inf = x_bar + math.log(
            basis.a2 * (d - eta * th_m) / (basis.a1 * (d - eta * th_p))
        ) / (th_p - th_m)
        c = 1.0 / basis.dh(b_inf - x_bar)
        m = math.log(c22 ** (1.0 / q) / basis.dh(b_inf - x_bar))
        v_binf = c * basis.h(b_inf - x_bar)
        lower = AffineTransformSegment(
            lo=0.0,
            hi=x_bar,
            c21=c21,
            m=m,
            q=q,
            z_lo=-m,
            z_hi=math.log(c22) / q - m,
            mu_over_s2=params.mu / params.sigma**2,
        )
        segments = [
            lower,
            HSegment(lo=x_bar, hi=b_inf, c=c, basis=basis, x_off=x_bar),
            LinearSegment(lo=b_inf, hi=math.inf, slope=1.0, level=v_binf - b_inf),
        ]
        regime = Regime(RegimeCase.B1, thresholds(params))
        return _assemble(params, math.inf, regime, b_inf, x_bar, segments,
                         {"b_inf": b_inf, "v_b_inf": v_binf, "M": m, "x_bar": x_bar})
    if branch == "C":
        if not params.is_cheap:
            raise RegimeError("branch C requires mu == eta")
        x_hat = cheap_switch(params)
        basis = cheap_basis(params)
        q = 1.0 + d * params.eta_bar
        b_inf = x_hat + math.log(
            basis.a2 * (d - eta * th_m) / (basis.a1 * (d - eta * th_p))
        ) / (th_p - th_m)
        c = 1.0 / basis.dh(b_inf - x_hat)
        v_binf = c * basis.h(b_inf - x_hat)
        segments = [
            PowerSegment(
                lo=0.0,
                hi=x_hat,
                coeff=c,
                p=d * params.eta_bar / q,
                u_slope=params.mu / params.sigma**2 * q,
            ),
            HSegment(lo=x_hat, hi=b_inf, c=c, basis=basis, x_off=x_hat),
            LinearSegment(lo=b_inf, hi=math.inf, slope=1.0, level=v_binf - b_inf),
        ]
        regime = Regime(RegimeCase.C1, thresholds(params))
        return _assemble(params, math.inf, regime, b_inf, x_hat, segments,
                         {"b_inf": b_inf, "v_b_inf": v_binf, "x_hat": x_hat})
    raise DomainError(f"unknown branch {branch!r}; expected 'A', 'B', or 'C'")
