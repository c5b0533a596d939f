"""Command-line interface: classify, solve, tabulate, sweep, simulate, verify.

Exit codes: 0 success, 1 verification/agreement failure, 2 usage or domain
error, 3 numerical failure.  Output is JSON (17 significant digits,
round-trip exact) or CSV (10 significant digits, dot decimal separator,
LF line endings), deterministic for a given configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .errors import BracketError, DomainError, NumericalError, RangeError, RegimeError
from .model import ModelParams, classify
from .montecarlo import SimConfig, estimate_npv
from .policy import ConstantRetention, OptimalStrategy
from .valuefn import Solution, solve, solve_with_barrier
from .verify import RESIDUAL_TOL, check_shape, hjb_residual, perturbed_solution

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _json_default(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(f"not serializable: {x!r}")


def _jnum(x: float):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    f = float(x)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return float(format(f, ".17g"))


def _csv_num(x: float) -> str:
    return format(float(x), ".10g")


def _emit(payload, fmt: str, out_path: str | None) -> None:
    if fmt == "json":
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    else:
        text = _to_csv(payload)
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(payload) -> str:
    if isinstance(payload, dict):
        rows = [payload]
    else:
        rows = list(payload)
    if not rows:
        return "\n"
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for key in header:
            val = row[key]
            if isinstance(val, float):
                cells.append(_csv_num(val))
            elif val is None:
                cells.append("")
            else:
                cells.append(str(val))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise DomainError("config file must hold a JSON object")
    return cfg


def _params_from(args, cfg: dict) -> ModelParams:
    vals = {}
    for key in ("delta", "sigma", "mu", "eta"):
        flag = getattr(args, key, None)
        if flag is not None:
            vals[key] = flag
        elif key in cfg:
            vals[key] = float(cfg[key])
        else:
            raise DomainError(f"missing parameter {key!r} (config file or flag)")
    return ModelParams(**vals)


def _gamma_from(args, cfg: dict) -> float:
    if getattr(args, "gamma", None) is not None:
        return args.gamma
    if "gamma" in cfg:
        return float(cfg["gamma"])
    raise DomainError("missing gamma (config file or --gamma)")


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    return sec if isinstance(sec, dict) else {}


def _opt(args, cfg_sec: dict, key: str, default):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in cfg_sec:
        return cfg_sec[key]
    return default


def _solution_payload(sol: Solution) -> dict:
    return {
        "regime": sol.regime.case.value,
        "gamma": _jnum(sol.gamma),
        "b": _jnum(sol.b),
        "x_switch": _jnum(sol.x_switch),
        "constants": {k: _jnum(v) for k, v in sorted(sol.constants.items())},
    }


def cmd_classify(args) -> int:
    cfg = _load_config(args)
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    regime = classify(params, gamma)
    th = regime.thresholds
    payload = {"regime": regime.case.value, "gamma": _jnum(gamma)}
    for name in ("gamma0", "gamma1", "gamma2", "gamma_bar1"):
        val = getattr(th, name)
        if val is not None:
            payload[name] = _jnum(val)
    _emit(payload, args.format or "json", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    if args.barrier is not None:
        sol = solve_with_barrier(params, gamma, args.barrier)
    else:
        sol = solve(params, gamma)
    _emit(_solution_payload(sol), args.format or "json", args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    cfg = _load_config(args)
    sec = _section(cfg, "curve")
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    barrier = _opt(args, sec, "barrier", None)
    if barrier is not None:
        sol = solve_with_barrier(params, gamma, float(barrier))
    else:
        sol = solve(params, gamma)
    x_min = float(_opt(args, sec, "x-min", 1e-3))
    x_max = float(_opt(args, sec, "x-max", 0.5))
    steps = int(_opt(args, sec, "x-steps", 200))
    if not (0.0 < x_min < x_max) or steps < 2:
        raise DomainError("curve grid requires 0 < x-min < x-max and x-steps >= 2")
    use_log = bool(_opt(args, sec, "x-log", False))
    rows = []
    for i in range(steps):
        f = i / (steps - 1)
        x = x_min * (x_max / x_min) ** f if use_log else x_min + (x_max - x_min) * f
        v, v1, v2 = sol.eval(x)
        rows.append(
            {
                "x": x,
                "v": v,
                "v_prime": v1,
                "v_double_prime": v2,
                "u_star": sol.u_star(x),
            }
        )
    _emit(rows, args.format or "csv", args.out)
    return EXIT_OK


def cmd_sweep_gamma(args) -> int:
    cfg = _load_config(args)
    sec = _section(cfg, "sweep-gamma")
    params = _params_from(args, cfg)
    n_min = float(_opt(args, sec, "n-min", -4.0))
    n_max = float(_opt(args, sec, "n-max", 50.0))
    n_step = float(_opt(args, sec, "n-step", 0.2))
    if n_step <= 0 or n_max < n_min:
        raise DomainError("sweep requires n-step > 0 and n-max >= n-min")
    rows = []
    k = 0
    while True:
        n = n_min + k * n_step
        if n > n_max + 1e-12:
            break
        k += 1
        g = 2.0**n
        sol = solve(params, g)
        rows.append(
            {
                "gamma": g,
                "b": sol.b,
                "x_switch": sol.x_switch,
                "v_at_b": sol.value(sol.b) if sol.b > 0 else 0.0,
                "v_at_x_switch": sol.value(sol.x_switch) if sol.x_switch > 0 else 0.0,
            }
        )
    _emit(rows, args.format or "csv", args.out)
    return EXIT_OK


def cmd_sweep_barrier(args) -> int:
    cfg = _load_config(args)
    sec = _section(cfg, "sweep-barrier")
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    b_min = float(_opt(args, sec, "b-min", 0.0))
    b_max = float(_opt(args, sec, "b-max", 0.5))
    b_step = float(_opt(args, sec, "b-step", 0.02))
    x_spec = _opt(args, sec, "x-values", "0.05,0.1,0.2,0.4")
    xs = [float(tok) for tok in str(x_spec).split(",") if tok.strip()]
    if b_step <= 0 or b_max < b_min or not xs:
        raise DomainError("barrier sweep requires b-step > 0, b-max >= b-min, x-values")
    rows = []
    k = 0
    while True:
        b = b_min + k * b_step
        if b > b_max + 1e-12:
            break
        k += 1
        try:
            sol = solve_with_barrier(params, gamma, b)
        except (DomainError, RegimeError):
            continue  # barrier outside every construction's domain at this gamma
        for x in xs:
            rows.append({"b": b, "x": x, "v": sol.value(x)})
    _emit(rows, args.format or "csv", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    sec = _section(cfg, "simulate")
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    x0 = _opt(args, sec, "x0", None)
    if x0 is None:
        raise DomainError("missing --x0 (or simulate.x0 in the config)")
    sim = SimConfig(
        x0=float(x0),
        n_paths=int(_opt(args, sec, "paths", 20000)),
        dt=float(_opt(args, sec, "dt", 1e-3)),
        t_max=(lambda t: float(t) if t is not None else None)(_opt(args, sec, "tmax", None)),
        master_seed=int(_opt(args, sec, "seed", 20240707)),
        antithetic=not bool(_opt(args, sec, "no-antithetic", False)),
        ruin_bridge=not bool(_opt(args, sec, "no-bridge", False)),
        backend=_opt(args, sec, "backend", None),
    )
    optimal = solve(params, gamma)
    closed_form = optimal.value(sim.x0)
    ret = _opt(args, sec, "retention", None)
    barrier = _opt(args, sec, "barrier", None)
    suboptimal = ret is not None or barrier is not None
    if suboptimal:
        u = float(ret) if ret is not None else 1.0
        bar = float(barrier) if barrier is not None else optimal.b
        strategy = ConstantRetention(u=u, barrier=bar)
    else:
        strategy = OptimalStrategy(optimal)
    result = estimate_npv(strategy, params, gamma, sim)
    err = result.npv_mean - closed_form
    if suboptimal:
        passed = result.npv_mean <= closed_form + 3.0 * result.npv_stderr
    else:
        passed = abs(err) <= 3.0 * result.npv_stderr
    payload = {
        "npv_mean": _jnum(result.npv_mean),
        "npv_stderr": _jnum(result.npv_stderr),
        "ruin_fraction": _jnum(result.ruin_fraction),
        "mean_ruin_time": _jnum(result.mean_ruin_time),
        "n_paths": result.n_paths,
        "backend": result.backend,
        "closed_form": _jnum(closed_form),
        "error": _jnum(err),
        "passed": passed,
    }
    _emit(payload, args.format or "json", args.out)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    sec = _section(cfg, "verify")
    params = _params_from(args, cfg)
    gamma = _gamma_from(args, cfg)
    perturb = _opt(args, sec, "perturb-barrier", None)
    if perturb is not None:
        sol = perturbed_solution(params, gamma, float(perturb))
    else:
        sol = solve(params, gamma)
    res = hjb_residual(sol, params, gamma)
    shape = check_shape(sol)
    passed = res.max_hjb_residual <= RESIDUAL_TOL and shape.shape_flags.all_true()
    payload = {
        "regime": sol.regime.case.value,
        "b": _jnum(sol.b),
        "x_switch": _jnum(sol.x_switch),
        "payout_level_from_slope": _jnum(res.payout_level),
        "max_hjb_residual": _jnum(res.max_hjb_residual),
        "worst_x": _jnum(res.worst_x),
        "residual_tol": _jnum(RESIDUAL_TOL),
        "shape_flags": {k: bool(v) for k, v in vars(shape.shape_flags).items()},
        "breakpoint_jumps": [
            {"x": _jnum(x), "dv": _jnum(a), "dv1": _jnum(b), "dv2": _jnum(c)}
            for x, a, b, c in res.breakpoint_jumps
        ],
        "passed": passed,
    }
    _emit(payload, args.format or "json", args.out)
    return EXIT_OK if passed else EXIT_FAIL


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--delta", type=float)
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--mu", type=float)
    sub.add_argument("--eta", type=float)
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--out", help="write output to this path instead of stdout")
    sub.add_argument("--format", choices=("csv", "json"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solver",
        description="Optimal periodic-payout / proportional-reinsurance solver.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("classify", help="regime and thresholds")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = subs.add_parser("solve", help="barrier, switch level, constants")
    _add_common(p)
    p.add_argument("--barrier", type=float, help="build at this (sub-optimal) barrier")
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser("curve", help="value function on an x grid")
    _add_common(p)
    p.add_argument("--barrier", type=float)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--x-steps", type=int)
    p.add_argument("--x-log", action="store_const", const=True)
    p.set_defaults(func=cmd_curve)

    p = subs.add_parser("sweep-gamma", help="barrier trajectory over gamma = 2^N")
    _add_common(p)
    p.add_argument("--n-min", type=float)
    p.add_argument("--n-max", type=float)
    p.add_argument("--n-step", type=float)
    p.set_defaults(func=cmd_sweep_gamma)

    p = subs.add_parser("sweep-barrier", help="value at probe points per barrier")
    _add_common(p)
    p.add_argument("--b-min", type=float)
    p.add_argument("--b-max", type=float)
    p.add_argument("--b-step", type=float)
    p.add_argument("--x-values", help="comma-separated probe points")
    p.set_defaults(func=cmd_sweep_barrier)

    p = subs.add_parser("simulate", help="Monte Carlo estimate vs closed form")
    _add_common(p)
    p.add_argument("--x0", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tmax", type=float)
    p.add_argument("--no-antithetic", action="store_const", const=True)
    p.add_argument("--no-bridge", action="store_const", const=True)
    p.add_argument("--backend", choices=("compiled", "python"))
    p.add_argument("--retention", type=float, help="constant retention strategy")
    p.add_argument("--barrier", type=float, help="override the payout barrier")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("verify", help="dynamic-programming and shape certification")
    _add_common(p)
    p.add_argument("--perturb-barrier", type=float, help="relative barrier perturbation")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (DomainError, RangeError, RegimeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, BracketError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
