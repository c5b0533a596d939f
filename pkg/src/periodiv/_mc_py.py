"""Pure-Python simulation kernel; the reference twin of the compiled one.

Both kernels implement exactly the same algorithm and random stream so the
compiled extension can be validated bit-for-bit against this module:

* per-path stream: splitmix64(master_seed XOR path_index) seeds xoshiro256++;
* uniforms are ((x >> 11) + 0.5) * 2^-53, strictly inside (0, 1);
* normals by Box-Muller, both branches used, cached pairwise;
* all decision (arrival) times are drawn first, so an antithetic partner
  re-deriving the same stream shares them exactly;
* every Euler sub-step consumes one normal, and one extra uniform for the
  diffusion-bridge ruin test when that correction is enabled.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_TWO_PI = 6.283185307179586
_INV_2_53 = 2.0**-53


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    z = z ^ (z >> 31)
    return state, z


class Xoshiro256pp:
    """xoshiro256++ with splitmix64 seeding; matches the compiled kernel."""

    __slots__ = ("s0", "s1", "s2", "s3", "_have_normal", "_normal")

    def __init__(self, seed: int):
        sm = seed & _MASK
        sm, self.s0 = _splitmix64(sm)
        sm, self.s1 = _splitmix64(sm)
        sm, self.s2 = _splitmix64(sm)
        sm, self.s3 = _splitmix64(sm)
        self._have_normal = False
        self._normal = 0.0

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        t = (s0 + s3) & _MASK
        result = (((t << 23) | (t >> 41)) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) * _INV_2_53

    def normal(self) -> float:
        if self._have_normal:
            self._have_normal = False
            return self._normal
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        a = _TWO_PI * u2
        self._normal = r * math.sin(a)
        self._have_normal = True
        return r * math.cos(a)


def _lookup_u(table: list[float], x_max: float, x: float) -> float:
    n = len(table)
    if n == 1 or x_max <= 0.0 or x >= x_max:
        return table[-1]
    if x <= 0.0:
        return table[0]
    pos = x * (n - 1) / x_max
    k = int(pos)
    if k >= n - 1:
        return table[-1]
    frac = pos - k
    return table[k] * (1.0 - frac) + table[k + 1] * frac


def simulate_one(
    path_index: int,
    sign: float,
    master_seed: int,
    x0: float,
    dt: float,
    t_max: float,
    gamma: float,
    delta: float,
    eta: float,
    mu: float,
    sigma: float,
    barrier: float,
    u_table: list[float],
    u_x_max: float,
    bridge: bool,
    record: bool = False,
):
    """One trajectory; returns (npv, ruin_time, final_x, record_dict)."""
    rng = Xoshiro256pp((master_seed ^ path_index) & _MASK)

    arrivals: list[float] = []
    t_arr = 0.0
    while True:
        t_arr += -math.log(rng.uniform()) / gamma
        if t_arr > t_max:
            break
        arrivals.append(t_arr)

    x = x0
    t = 0.0
    npv = 0.0
    ruin_time = -1.0
    i_arr = 0
    n_arr = len(arrivals)
    sqrt_dt = math.sqrt(dt)
    times = [0.0] if record else None
    surplus = [x0] if record else None
    dividends: list[tuple[float, float]] = [] if record else None

    def advance(t_from: float, t_to: float) -> bool:
        nonlocal x
        h = t_to - t_from
        if h <= 0.0:
            return True
        u = _lookup_u(u_table, u_x_max, x)
        z = rng.normal() * sign
        s_h = sqrt_dt if h == dt else math.sqrt(h)
        x_new = x + (eta - (1.0 - u) * mu) * h + sigma * u * s_h * z
        ruined = x_new < 0.0
        if bridge:
            ub = rng.uniform()
            var_h = sigma * sigma * u * u * h
            if not ruined and x > 0.0 and var_h > 0.0:
                q = 2.0 * x * x_new / var_h
                if q < 40.0 and ub < math.exp(-q):
                    ruined = True
        x = x_new
        if record:
            times.append(t_to)
            surplus.append(x)
        return not ruined

    n_steps = int(math.ceil(t_max / dt - 1e-12))
    alive = True
    for k in range(n_steps):
        t1 = (k + 1) * dt
        if t1 > t_max:
            t1 = t_max
        while i_arr < n_arr and arrivals[i_arr] <= t1:
            a = arrivals[i_arr]
            i_arr += 1
            if not advance(t, a):
                t, alive = a, False
                break
            t = a
            pay = x - barrier
            if pay > 0.0:
                npv += math.exp(-delta * a) * pay
                x -= pay
                if record:
                    times.append(a)
                    surplus.append(x)
                    dividends.append((a, pay))
        if not alive:
            break
        if not advance(t, t1):
            t, alive = t1, False
            break
        t = t1
    if not alive:
        ruin_time = t

    rec = None
    if record:
        rec = {
            "times": times,
            "surplus": surplus,
            "dividend_events": dividends,
            "ruin_time": None if ruin_time < 0.0 else ruin_time,
        }
    return npv, ruin_time, x, rec


def run_batch(
    n_lo: int,
    n_hi: int,
    master_seed: int,
    antithetic: bool,
    x0: float,
    dt: float,
    t_max: float,
    gamma: float,
    delta: float,
    eta: float,
    mu: float,
    sigma: float,
    barrier: float,
    u_table,
    u_x_max: float,
    bridge: bool,
    out_npv,
    out_ruin_count,
    out_ruin_time_sum,
    out_final_x_sum,
) -> None:
    """Fill per-stream outputs for path indices [n_lo, n_hi)."""
    table = list(u_table)
    for i in range(n_lo, n_hi):
        j = i - n_lo
        npv_p, rt_p, fx_p, _ = simulate_one(
            i, 1.0, master_seed, x0, dt, t_max, gamma, delta, eta, mu, sigma,
            barrier, table, u_x_max, bridge,
        )
        if antithetic:
            npv_m, rt_m, fx_m, _ = simulate_one(
                i, -1.0, master_seed, x0, dt, t_max, gamma, delta, eta, mu, sigma,
                barrier, table, u_x_max, bridge,
            )
            out_npv[j] = 0.5 * (npv_p + npv_m)
            out_ruin_count[j] = (rt_p >= 0.0) + (rt_m >= 0.0)
            out_ruin_time_sum[j] = (rt_p if rt_p >= 0.0 else 0.0) + (
                rt_m if rt_m >= 0.0 else 0.0
            )
            out_final_x_sum[j] = (fx_p if rt_p < 0.0 else 0.0) + (
                fx_m if rt_m < 0.0 else 0.0
            )
        else:
            out_npv[j] = npv_p
            out_ruin_count[j] = 1.0 if rt_p >= 0.0 else 0.0
            out_ruin_time_sum[j] = rt_p if rt_p >= 0.0 else 0.0
            out_final_x_sum[j] = fx_p if rt_p < 0.0 else 0.0


def rng_probe(seed: int, n: int) -> list[float]:
    """First n uniforms of the stream; used to cross-check backends."""
    rng = Xoshiro256pp(seed & _MASK)
    return [rng.uniform() for _ in range(n)]
