"""Benchmark the compiled simulation kernel against its pure-Python twin.

The two backends implement the same algorithm and random stream, so this
also asserts that their outputs are bit-identical before timing them.

Usage: python benchmarks/bench_backends.py [n_paths]
"""

import sys
import time

from periodiv.model import ModelParams
from periodiv.montecarlo import SimConfig, estimate_npv
from periodiv.policy import OptimalStrategy
from periodiv.valuefn import solve

try:
    from periodiv import _mc_cy  # noqa: F401

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def run(backend: str, n_paths: int) -> tuple[float, float]:
    params = ModelParams(delta=1.5, sigma=0.3, mu=0.8, eta=0.5)
    gamma = 2.0
    strategy = OptimalStrategy(solve(params, gamma))
    cfg = SimConfig(x0=0.1, n_paths=n_paths, dt=1e-3, master_seed=7 << 32, backend=backend)
    t0 = time.perf_counter()
    res = estimate_npv(strategy, params, gamma, cfg)
    return time.perf_counter() - t0, res.npv_mean


def main() -> int:
    n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    print(f"workload: {n_paths} antithetic pairs, dt=1e-3, horizon 40/delta")
    t_py, mean_py = run("python", n_paths)
    print(f"python   backend: {t_py:8.3f} s  ({n_paths / t_py:9.1f} pairs/s)  mean={mean_py!r}")
    if not HAVE_COMPILED:
        print("compiled backend: not built (install with Cython to compare)")
        return 0
    t_cy, mean_cy = run("compiled", n_paths)
    print(f"compiled backend: {t_cy:8.3f} s  ({n_paths / t_cy:9.1f} pairs/s)  mean={mean_cy!r}")
    if mean_py != mean_cy:
        print("ERROR: backends disagree")
        return 1
    print(f"bit-identical results; speedup x{t_py / t_cy:.0f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
