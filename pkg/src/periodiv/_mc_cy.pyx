# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel; the hot twin of ``_mc_py``.

Statement-for-statement the same algorithm and random stream as the pure
Python module, so the two backends produce bit-identical results on the
same inputs.  See ``_mc_py`` for the stream layout.
"""

from libc.math cimport ceil, cos, exp, log, sin, sqrt
from libc.stdlib cimport free, malloc, realloc

cdef double _TWO_PI = 6.283185307179586
cdef double _INV_2_53 = 2.0 ** -53


cdef struct Rng:
    unsigned long long s0
    unsigned long long s1
    unsigned long long s2
    unsigned long long s3
    int have_normal
    double cached_normal


cdef inline unsigned long long _splitmix_next(unsigned long long *state) nogil:
    cdef unsigned long long z
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _rng_init(Rng *rng, unsigned long long seed) nogil:
    cdef unsigned long long sm = seed
    rng.s0 = _splitmix_next(&sm)
    rng.s1 = _splitmix_next(&sm)
    rng.s2 = _splitmix_next(&sm)
    rng.s3 = _splitmix_next(&sm)
    rng.have_normal = 0
    rng.cached_normal = 0.0


cdef inline unsigned long long _rotl(unsigned long long x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline unsigned long long _next_u64(Rng *rng) nogil:
    cdef unsigned long long result = _rotl(rng.s0 + rng.s3, 23) + rng.s0
    cdef unsigned long long t = rng.s1 << 17
    rng.s2 ^= rng.s0
    rng.s3 ^= rng.s1
    rng.s1 ^= rng.s2
    rng.s0 ^= rng.s3
    rng.s2 ^= t
    rng.s3 = _rotl(rng.s3, 45)
    return result


cdef inline double _uniform(Rng *rng) nogil:
    return (<double>(_next_u64(rng) >> 11) + 0.5) * _INV_2_53


cdef inline double _normal(Rng *rng) nogil:
    cdef double u1, u2, r, a
    if rng.have_normal:
        rng.have_normal = 0
        return rng.cached_normal
    u1 = _uniform(rng)
    u2 = _uniform(rng)
    r = sqrt(-2.0 * log(u1))
    a = _TWO_PI * u2
    rng.cached_normal = r * sin(a)
    rng.have_normal = 1
    return r * cos(a)


cdef inline double _lookup_u(const double *table, int n, double x_max, double x) nogil:
    cdef double pos, frac
    cdef int k
    if n == 1 or x_max <= 0.0 or x >= x_max:
        return table[n - 1]
    if x <= 0.0:
        return table[0]
    pos = x * (n - 1) / x_max
    k = <int>pos
    if k >= n - 1:
        return table[n - 1]
    frac = pos - k
    return table[k] * (1.0 - frac) + table[k + 1] * frac


cdef int _simulate_one(
    unsigned long long path_index,
    double sign,
    unsigned long long master_seed,
    double x0, double dt, double t_max,
    double gamma, double delta, double eta, double mu, double sigma,
    double barrier,
    const double *u_table, int u_n, double u_x_max,
    int bridge,
    double *out_npv, double *out_ruin_time, double *out_final_x,
) nogil:
    """One trajectory; returns 0 on success, -1 on allocation failure."""
    cdef Rng rng
    cdef double *arrivals
    cdef int cap_arr = 256
    cdef int n_arr = 0
    cdef int i_arr = 0
    cdef double t_arr = 0.0
    cdef double x, t, npv, ruin_time, sqrt_dt, t1, a, h, u, z, s_h, x_new, ub, q, pay, var_h
    cdef long n_steps, k
    cdef int alive = 1
    cdef int ruined
    cdef double *tmp

    _rng_init(&rng, master_seed ^ path_index)

    arrivals = <double *>malloc(cap_arr * sizeof(double))
    if arrivals == NULL:
        return -1
    while True:
        t_arr += -log(_uniform(&rng)) / gamma
        if t_arr > t_max:
            break
        if n_arr == cap_arr:
            cap_arr *= 2
            tmp = <double *>realloc(arrivals, cap_arr * sizeof(double))
            if tmp == NULL:
                free(arrivals)
                return -1
            arrivals = tmp
        arrivals[n_arr] = t_arr
        n_arr += 1

    x = x0
    t = 0.0
    npv = 0.0
    ruin_time = -1.0
    sqrt_dt = sqrt(dt)
    n_steps = <long>ceil(t_max / dt - 1e-12)

    for k in range(n_steps):
        t1 = (k + 1) * dt
        if t1 > t_max:
            t1 = t_max
        while i_arr < n_arr and arrivals[i_arr] <= t1:
            a = arrivals[i_arr]
            i_arr += 1
            # advance t -> a
            h = a - t
            if h > 0.0:
                u = _lookup_u(u_table, u_n, u_x_max, x)
                z = _normal(&rng) * sign
                s_h = sqrt_dt if h == dt else sqrt(h)
                x_new = x + (eta - (1.0 - u) * mu) * h + sigma * u * s_h * z
                ruined = x_new < 0.0
                if bridge:
                    ub = _uniform(&rng)
                    var_h = sigma * sigma * u * u * h
                    if (not ruined) and x > 0.0 and var_h > 0.0:
                        q = 2.0 * x * x_new / var_h
                        if q < 40.0 and ub < exp(-q):
                            ruined = 1
                x = x_new
                if ruined:
                    t = a
                    alive = 0
                    break
            t = a
            pay = x - barrier
            if pay > 0.0:
                npv += exp(-delta * a) * pay
                x -= pay
        if not alive:
            break
        # advance t -> t1
        h = t1 - t
        if h > 0.0:
            u = _lookup_u(u_table, u_n, u_x_max, x)
            z = _normal(&rng) * sign
            s_h = sqrt_dt if h == dt else sqrt(h)
            x_new = x + (eta - (1.0 - u) * mu) * h + sigma * u * s_h * z
            ruined = x_new < 0.0
            if bridge:
                ub = _uniform(&rng)
                var_h = sigma * sigma * u * u * h
                if (not ruined) and x > 0.0 and var_h > 0.0:
                    q = 2.0 * x * x_new / var_h
                    if q < 40.0 and ub < exp(-q):
                        ruined = 1
            x = x_new
            if ruined:
                t = t1
                alive = 0
                break
        t = t1
    if not alive:
        ruin_time = t

    free(arrivals)
    out_npv[0] = npv
    out_ruin_time[0] = ruin_time
    out_final_x[0] = x
    return 0


def run_batch(
    long n_lo, long n_hi,
    unsigned long long master_seed,
    bint antithetic,
    double x0, double dt, double t_max,
    double gamma, double delta, double eta, double mu, double sigma,
    double barrier,
    double[::1] u_table, double u_x_max,
    bint bridge,
    double[::1] out_npv,
    double[::1] out_ruin_count,
    double[::1] out_ruin_time_sum,
    double[::1] out_final_x_sum,
):
    """Fill per-stream outputs for path indices [n_lo, n_hi)."""
    cdef long i, j
    cdef int u_n = u_table.shape[0]
    cdef const double *table = &u_table[0]
    cdef double npv_p, rt_p, fx_p, npv_m, rt_m, fx_m
    cdef int rc = 0
    with nogil:
        for i in range(n_lo, n_hi):
            j = i - n_lo
            rc = _simulate_one(
                <unsigned long long>i, 1.0, master_seed, x0, dt, t_max,
                gamma, delta, eta, mu, sigma, barrier,
                table, u_n, u_x_max, bridge, &npv_p, &rt_p, &fx_p,
            )
            if rc != 0:
                break
            if antithetic:
                rc = _simulate_one(
                    <unsigned long long>i, -1.0, master_seed, x0, dt, t_max,
                    gamma, delta, eta, mu, sigma, barrier,
                    table, u_n, u_x_max, bridge, &npv_m, &rt_m, &fx_m,
                )
                if rc != 0:
                    break
                out_npv[j] = 0.5 * (npv_p + npv_m)
                out_ruin_count[j] = (1.0 if rt_p >= 0.0 else 0.0) + (1.0 if rt_m >= 0.0 else 0.0)
                out_ruin_time_sum[j] = (rt_p if rt_p >= 0.0 else 0.0) + (rt_m if rt_m >= 0.0 else 0.0)
                out_final_x_sum[j] = (fx_p if rt_p < 0.0 else 0.0) + (fx_m if rt_m < 0.0 else 0.0)
            else:
                out_npv[j] = npv_p
                out_ruin_count[j] = 1.0 if rt_p >= 0.0 else 0.0
                out_ruin_time_sum[j] = rt_p if rt_p >= 0.0 else 0.0
                out_final_x_sum[j] = fx_p if rt_p < 0.0 else 0.0
    if rc != 0:
        raise MemoryError("arrival buffer allocation failed")


def rng_probe(unsigned long long seed, int n):
    """First n uniforms of the stream; used to cross-check backends."""
    cdef Rng rng
    _rng_init(&rng, seed)
    return [_uniform(&rng) for _ in range(n)]
