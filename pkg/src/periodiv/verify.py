"""Independent certification of constructed value functions.

Checks three things, none of which reuse the construction path: that the
dynamic-programming equation holds pointwise on a dense grid, that the
shape hypotheses behind the optimality argument hold (increasing, concave,
decreasing derivative ratio, smooth fit, slope one at the barrier), and
that the family converges to its singular-control limit as the decision
intensity grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError, RegimeError
from .model import ModelParams, RegimeCase, classify
from .numerics import Bracket, find_root
from .valuefn import Solution, asymptotic, solve, solve_with_barrier

RESIDUAL_TOL = 1e-6
SMOOTH_FIT_TOL = 1e-6
BARRIER_SLOPE_TOL = 1e-8


@dataclass
class ShapeFlags:
    increasing: bool = True
    concave: bool = True
    ratio_decreasing: bool = True
    smooth_fit: bool = True
    barrier_slope: bool = True
    retention_ok: bool = True

    def all_true(self) -> bool:
        return all(
            (
                self.increasing,
                self.concave,
                self.ratio_decreasing,
                self.smooth_fit,
                self.barrier_slope,
                self.retention_ok,
            )
        )


@dataclass
class VerificationReport:
    max_hjb_residual: float = 0.0
    worst_x: float = 0.0
    shape_flags: ShapeFlags = field(default_factory=ShapeFlags)
    breakpoint_jumps: list[tuple[float, float, float, float]] = field(default_factory=list)
    payout_level: float = 0.0
    residual_tol: float = RESIDUAL_TOL

    @property
    def passed(self) -> bool:
        return self.max_hjb_residual <= self.residual_tol and self.shape_flags.all_true()


def _x_scale(sol: Solution) -> float:
    lam = sol.constants.get("lambda")
    if lam is not None and lam < 0.0:
        return max(sol.b, sol.x_switch) + 5.0 / abs(lam)
    # Singular-control limit: no intervention root; use the barrier scale.
    return max(sol.b, sol.x_switch) + 1.0


def verification_grid(sol: Solution, n: int = 2000) -> list[float]:
    """Log-spaced points plus clusters around each breakpoint.

    Every point keeps a distance of at least 1e-7 from every breakpoint so
    one-sided formulas are evaluated strictly inside their segments.
    """
    hi = _x_scale(sol)
    lo = 1e-4
    pts = [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]
    for bp in sol.breakpoints:
        for k in range(1, 26):
            off = 1e-7 + (1e-3 - 1e-7) * (k / 25.0) ** 2
            pts.append(bp - off)
            pts.append(bp + off)
    bps = sol.breakpoints
    kept = [
        x
        for x in pts
        if x > 0.0 and all(abs(x - bp) >= 1e-7 for bp in bps)
    ]
    return sorted(set(kept))


def payout_level(sol: Solution) -> float:
    """The level inf{x : v'(x) < 1} recovered from the solution's own slope.

    For an optimally built solution this coincides with its barrier; for a
    perturbed or sub-optimal one it does not, which is exactly what makes
    the residual test sensitive.
    """
    if math.isinf(sol.gamma):
        return sol.b
    lo = 1e-12
    if sol.eval(lo)[1] <= 1.0:
        return 0.0
    hi = max(sol.b, sol.x_switch, lo) + 1.0
    while sol.eval(hi)[1] >= 1.0:
        hi *= 2.0
        if hi > 1e9:
            raise DomainError("slope never falls below one; no payout level")
    return find_root(lambda x: sol.eval(x)[1] - 1.0, Bracket(lo, hi), tol=1e-14)


def _breakpoint_jumps(sol: Solution) -> list[tuple[float, float, float, float]]:
    jumps = []
    for i, bp in enumerate(sol.breakpoints):
        left = sol.segments[i].triple(bp)
        right = sol.segments[i + 1].triple(bp)
        jumps.append(
            (
                bp,
                abs(left[0] - right[0]) / (1.0 + abs(left[0])),
                abs(left[1] - right[1]) / (1.0 + abs(left[1])),
                abs(left[2] - right[2]) / (1.0 + abs(left[2])),
            )
        )
    return jumps


def hjb_residual(
    sol: Solution,
    params: ModelParams,
    gamma: float,
    grid: list[float] | None = None,
) -> VerificationReport:
    """Max relative residual of the dynamic-programming equation on a grid.

    At each point the risk maximization is resolved analytically: the
    interior retention applies when -mu*v'/(sigma^2 v'') < 1, full risk
    otherwise; a degenerate v'' = 0 falls back to the full-risk branch.
    The payout term gamma*(x - b + v(b) - v(x)) switches on above the
    payout level derived from v' itself.
    """
    if grid is None:
        grid = verification_grid(sol)
    b_t = payout_level(sol)
    v_bt = sol.value(b_t) if b_t > 0.0 else 0.0
    mu, eta, d, s2 = params.mu, params.eta, params.delta, params.sigma**2
    worst = 0.0
    worst_x = grid[0]
    for x in grid:
        v, v1, v2 = sol.eval(x)
        if v2 < 0.0 and -mu * v1 / (s2 * v2) < 1.0:
            gen = -(mu * v1) ** 2 / (2.0 * s2 * v2) + (eta - mu) * v1 - d * v
        else:
            gen = 0.5 * s2 * v2 + eta * v1 - d * v
        r = gen
        if x > b_t:
            r += gamma * (x - b_t + v_bt - v)
        rel = abs(r) / (1.0 + abs(v))
        if rel > worst:
            worst, worst_x = rel, x
    report = VerificationReport(
        max_hjb_residual=worst,
        worst_x=worst_x,
        breakpoint_jumps=_breakpoint_jumps(sol),
        payout_level=b_t,
    )
    report.shape_flags.smooth_fit = all(
        max(j[1:]) <= SMOOTH_FIT_TOL for j in report.breakpoint_jumps
    )
    return report


def check_shape(sol: Solution, n: int = 2000) -> VerificationReport:
    """Shape hypotheses on a dense grid; failures are flags, not exceptions."""
    grid = verification_grid(sol, n)
    flags = ShapeFlags()
    trips = [sol.eval(x) for x in grid]
    flags.increasing = all(t[1] > 0.0 for t in trips)
    flags.concave = all(t[2] <= 1e-12 for t in trips)

    # v'/v'' decreasing wherever curvature is meaningfully negative and the
    # pair does not straddle a breakpoint.
    bps = sol.breakpoints
    ok = True
    prev_ratio = None
    prev_x = None
    for x, t in zip(grid, trips):
        if t[2] >= -1e-12:
            prev_ratio = None
            prev_x = x
            continue
        ratio = t[1] / t[2]
        if prev_ratio is not None and not _spans_breakpoint(prev_x, x, bps):
            if ratio > prev_ratio + 1e-9 * (1.0 + abs(prev_ratio)):
                ok = False
        prev_ratio, prev_x = ratio, x
    flags.ratio_decreasing = ok

    jumps = _breakpoint_jumps(sol)
    flags.smooth_fit = all(max(j[1:]) <= SMOOTH_FIT_TOL for j in jumps)

    if sol.b > 0.0:
        slope_b = sol.segment_at(sol.b).triple(sol.b)[1]
        flags.barrier_slope = abs(slope_b - 1.0) <= BARRIER_SLOPE_TOL
    else:
        flags.barrier_slope = sol.eval(1e-12)[1] <= 1.0 + 1e-10

    flags.retention_ok = _check_retention(sol, grid)
    report = VerificationReport(shape_flags=flags, breakpoint_jumps=jumps, payout_level=sol.b)
    return report


def _spans_breakpoint(a: float | None, b: float, bps: tuple[float, ...]) -> bool:
    if a is None:
        return True
    return any(a < bp < b for bp in bps)


def _check_retention(sol: Solution, grid: list[float]) -> bool:
    xs = sol.x_switch
    if xs <= 0.0:
        return True
    below = [x for x in grid if x < xs * (1.0 - 1e-9)]
    prev = -math.inf
    for x in below:
        u = sol.u_star(x)
        if u >= 1.0 + 1e-9 or u < prev - 1e-9:
            return False
        prev = u
    u_at_switch = sol.u_star(xs * (1.0 - 1e-10))
    return abs(u_at_switch - 1.0) <= 1e-6


def check_limits(
    params: ModelParams, branch: str, gamma_list: list[float]
) -> list[dict[str, float]]:
    """Sup-norm distance to the singular-control limit along increasing gamma.

    Each row reports the distance over (0, b_inf + 1], the barrier, and the
    value at the barrier; gammas must lie in the branch's top regime.
    """
    v_inf = asymptotic(params, branch)
    b_inf = v_inf.b
    top = {"A": RegimeCase.A1, "B": RegimeCase.B1, "C": RegimeCase.C1}[branch.upper()]
    n = 400
    xs = [1e-3 + (b_inf + 1.0 - 1e-3) * i / (n - 1) for i in range(n)]
    xs = [x for x in xs if all(abs(x - bp) > 1e-9 for bp in v_inf.breakpoints)]
    rows = []
    for g in gamma_list:
        regime = classify(params, g)
        if regime.case is not top:
            raise RegimeError(f"gamma={g} is in {regime.case.value}, not {top.value}")
        s = solve(params, g)
        dist = max(abs(s.value(x) - v_inf.value(x)) for x in xs)
        rows.append(
            {
                "gamma": g,
                "sup_dist": dist,
                "b": s.b,
                "v_at_b": s.value(s.b),
                "b_gap": abs(s.b - b_inf),
                "v_gap": abs(s.value(s.b) - v_inf.value(b_inf)),
            }
        )
    return rows


def perturbed_solution(params: ModelParams, gamma: float, rel: float = 0.01) -> Solution:
    """The family member at a barrier perturbed by a relative amount.

    Moves outward for cases whose construction admits larger barriers, and
    inward where the optimal barrier is the upper endpoint of the domain
    (the low-barrier retention cases).
    """
    s = solve(params, gamma)
    if s.b <= 0.0:
        raise DomainError("the optimal barrier is 0; nothing to perturb")
    case = s.regime.case
    if case in (RegimeCase.B2, RegimeCase.C2):
        b_new = s.b * (1.0 - abs(rel))
    else:
        b_new = s.b * (1.0 + abs(rel))
    return solve_with_barrier(params, gamma, b_new)
