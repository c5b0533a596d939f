"""Monte Carlo estimation of the expected discounted payout stream.

Simulates the controlled surplus by Euler-Maruyama with payout decisions at
the exact Poisson arrival times, which are inserted into the time grid.  A
compiled kernel is used when the extension built; the pure-Python twin
produces bit-identical results and is selected automatically otherwise.

Randomness is counter-based per path (splitmix64 of master_seed XOR path
index seeding xoshiro256++), so results are independent of execution order
and thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _mc_py
from .errors import DomainError, NumericalError
from .model import ModelParams
from .policy import ConstantRetention, Strategy

try:
    from . import _mc_cy
except ImportError:  # extension not built; pure-Python twin takes over
    _mc_cy = None

DEFAULT_BACKEND = "compiled" if _mc_cy is not None else "python"

_RETENTION_TABLE_SIZE = 4097


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``n_paths`` counts independent random streams; with ``antithetic`` on,
    each stream drives a mirrored pair of trajectories.  ``t_max`` defaults
    to 40/delta, making the truncated tail worth less than e^-40 of the
    running surplus scale.  ``ruin_bridge`` applies the diffusion-bridge
    correction for ruin between grid points (see the decisions in README).
    """

    x0: float
    n_paths: int
    dt: float = 1e-3
    t_max: float | None = None
    master_seed: int = 20240707
    antithetic: bool = True
    ruin_bridge: bool = True
    backend: str | None = None

    def __post_init__(self) -> None:
        if not (self.x0 > 0.0):
            raise DomainError(f"x0 must be positive, got {self.x0}")
        if self.n_paths < 1:
            raise DomainError(f"n_paths must be positive, got {self.n_paths}")
        if not (0.0 < self.dt <= 1e-2):
            raise DomainError(f"dt must lie in (0, 1e-2], got {self.dt}")
        if self.backend not in (None, "compiled", "python"):
            raise DomainError(f"unknown backend {self.backend!r}")

    def resolved_t_max(self, delta: float) -> float:
        t_max = 40.0 / delta if self.t_max is None else self.t_max
        if t_max < 20.0 / delta:
            raise DomainError(
                f"t_max={t_max} too short; needs >= 20/delta = {20.0 / delta}"
            )
        return t_max


@dataclass(frozen=True)
class SimResult:
    npv_mean: float
    npv_stderr: float
    ruin_fraction: float
    mean_ruin_time: float
    n_paths: int
    horizon_bound: float
    backend: str


@dataclass(frozen=True)
class PathRecord:
    times: tuple[float, ...]
    surplus: tuple[float, ...]
    dividend_events: tuple[tuple[float, float], ...]
    ruin_time: float | None
    npv: float


def _strategy_tables(strategy: Strategy) -> tuple[float, np.ndarray, float]:
    """(barrier, retention table, table range) for the kernels."""
    if isinstance(strategy, ConstantRetention):
        return strategy.barrier, np.array([strategy.u], dtype=np.float64), 0.0
    sol = strategy.solution
    xs = sol.x_switch
    if xs <= 0.0:
        return sol.b, np.array([1.0], dtype=np.float64), 0.0
    n = _RETENTION_TABLE_SIZE
    grid = np.linspace(0.0, xs, n)
    grid[0] = xs * 1e-12
    table = np.array([sol.u_star(float(x)) for x in grid], dtype=np.float64)
    table = np.clip(table, 0.0, 1.0)
    table[-1] = 1.0
    return sol.b, table, xs


def _pick_backend(config: SimConfig):
    name = config.backend or DEFAULT_BACKEND
    if name == "compiled":
        if _mc_cy is None:
            raise DomainError("compiled backend requested but the extension is not built")
        return _mc_cy, "compiled"
    return _mc_py, "python"


def _n_threads(n_paths: int, backend_name: str) -> int:
    raw = os.environ.get("SOLVER_THREADS", "0")
    try:
        t = int(raw)
    except ValueError:
        raise DomainError(f"SOLVER_THREADS must be an integer, got {raw!r}")
    if t < 0:
        raise DomainError(f"SOLVER_THREADS must be nonnegative, got {t}")
    if t == 0:
        t = os.cpu_count() or 1
    if backend_name == "python":
        t = 1  # the GIL serializes the pure-Python kernel anyway
    return max(1, min(t, n_paths))


def simulate_path(
    strategy: Strategy,
    params: ModelParams,
    gamma: float,
    config: SimConfig,
    path_index: int,
    antithetic_sign: float = 1.0,
) -> PathRecord:
    """One fully recorded trajectory (always via the reference kernel)."""
    if antithetic_sign not in (1.0, -1.0):
        raise DomainError("antithetic_sign must be +1.0 or -1.0")
    t_max = config.resolved_t_max(params.delta)
    barrier, table, u_x_max = _strategy_tables(strategy)
    npv, ruin_time, _, rec = _mc_py.simulate_one(
        path_index,
        antithetic_sign,
        config.master_seed,
        config.x0,
        config.dt,
        t_max,
        gamma,
        params.delta,
        params.eta,
        params.mu,
        params.sigma,
        barrier,
        list(table),
        u_x_max,
        config.ruin_bridge,
        record=True,
    )
    return PathRecord(
        times=tuple(rec["times"]),
        surplus=tuple(rec["surplus"]),
        dividend_events=tuple(rec["dividend_events"]),
        ruin_time=rec["ruin_time"],
        npv=npv,
    )


def estimate_npv(
    strategy: Strategy,
    params: ModelParams,
    gamma: float,
    config: SimConfig,
) -> SimResult:
    """Mean discounted payout with standard error over independent streams.

    Discounting uses the exact arrival times.  Aggregation is a fixed-order
    reduction over the per-stream array, so the result does not depend on
    how the streams were scheduled across threads.
    """
    if not (gamma > 0.0):
        raise DomainError(f"gamma must be positive, got {gamma}")
    t_max = config.resolved_t_max(params.delta)
    barrier, table, u_x_max = _strategy_tables(strategy)
    kernel, backend_name = _pick_backend(config)
    n = config.n_paths
    out_npv = np.empty(n, dtype=np.float64)
    out_ruin_count = np.empty(n, dtype=np.float64)
    out_ruin_time = np.empty(n, dtype=np.float64)
    out_final_x = np.empty(n, dtype=np.float64)

    def run_range(lo: int, hi: int) -> None:
        kernel.run_batch(
            lo,
            hi,
            config.master_seed,
            config.antithetic,
            config.x0,
            config.dt,
            t_max,
            gamma,
            params.delta,
            params.eta,
            params.mu,
            params.sigma,
            barrier,
            table,
            u_x_max,
            config.ruin_bridge,
            out_npv[lo:hi],
            out_ruin_count[lo:hi],
            out_ruin_time[lo:hi],
            out_final_x[lo:hi],
        )

    threads = _n_threads(n, backend_name)
    if threads == 1:
        run_range(0, n)
    else:
        chunk = (n + threads - 1) // threads
        bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda ab: run_range(*ab), bounds))

    mean = float(np.mean(out_npv))
    stderr = float(np.std(out_npv, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    trajectories = n * (2 if config.antithetic else 1)
    ruined = float(np.sum(out_ruin_count))
    ruin_fraction = ruined / trajectories
    mean_ruin_time = float(np.sum(out_ruin_time) / ruined) if ruined > 0 else math.nan
    survivors = trajectories - ruined
    mean_final_x = float(np.sum(out_final_x) / survivors) if survivors > 0 else 0.0
    horizon_bound = (
        math.exp(-params.delta * t_max) * gamma / (gamma + params.delta) * mean_final_x
    )
    if stderr > 0.0 and horizon_bound > stderr / 10.0:
        raise NumericalError(
            f"horizon truncation bound {horizon_bound} exceeds stderr/10; raise t_max"
        )
    return SimResult(
        npv_mean=mean,
        npv_stderr=stderr,
        ruin_fraction=ruin_fraction,
        mean_ruin_time=mean_ruin_time,
        n_paths=trajectories,
        horizon_bound=horizon_bound,
        backend=backend_name,
    )
