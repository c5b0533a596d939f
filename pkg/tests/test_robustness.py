"""Randomized parameter sweeps: certified output or a typed error, never junk.

The solver must either return a solution that passes the equation and shape
certification or raise a SolverError subclass; silent wrong output and
untyped crashes both count as failures.
"""

import random

import pytest

from periodiv.errors import SolverError
from periodiv.model import ModelParams
from periodiv.numerics import GammaLaw, gamma_cdf, gamma_inv_cdf
from periodiv.valuefn import solve
from periodiv.verify import check_shape, hjb_residual, verification_grid


def _draw(rng: random.Random, branch: int) -> tuple[ModelParams, float]:
    delta = rng.uniform(0.05, 3.0)
    sigma = rng.uniform(0.05, 1.5)
    eta = rng.uniform(0.05, 1.5)
    if branch == 0:
        mu = eta * rng.uniform(2.0, 4.0)
    elif branch == 1:
        mu = eta * rng.uniform(1.01, 1.95)
    else:
        mu = eta
    gamma = 2.0 ** rng.uniform(-4.0, 6.0)
    return ModelParams(delta=delta, sigma=sigma, mu=mu, eta=eta), gamma


@pytest.mark.parametrize("seed", [31007, 52121, 74203])
def test_random_instances_verify_or_raise_typed(seed):
    rng = random.Random(seed)
    certified = 0
    for trial in range(12):
        params, gamma = _draw(rng, trial % 3)
        try:
            sol = solve(params, gamma)
        except SolverError:
            continue  # typed refusal on out-of-range scales is acceptable
        report = hjb_residual(sol, params, gamma, grid=verification_grid(sol, 400))
        shape = check_shape(sol, n=400)
        assert report.max_hjb_residual <= 1e-6, (params, gamma)
        assert shape.shape_flags.all_true(), (params, gamma, vars(shape.shape_flags))
        certified += 1
    assert certified >= 8  # refusals must stay the exception


def test_extreme_scale_quantile_round_trip():
    # Regression: |cdf - target| products underflowing to zero used to break
    # the sign test inside root bracketing, sending the quantile far off.
    law = GammaLaw(shape=540.8497279999999, rate=104.946688)
    p = gamma_cdf(law, 1.0)
    assert 0.0 < p < 1e-190
    assert gamma_inv_cdf(law, p) == pytest.approx(1.0, abs=1e-9)


def test_extreme_diffusion_scale_cheap_cover():
    # Regression: barrier ~1e-200 once produced an inconsistent solution;
    # now either certified or refused with a typed error.
    params = ModelParams(
        delta=2.807571096080966,
        sigma=0.615774027067808,
        mu=0.07008018731689888,
        eta=0.07008018731689888,
    )
    gamma = 0.6776208834962615
    try:
        sol = solve(params, gamma)
    except SolverError:
        return
    assert check_shape(sol, n=400).shape_flags.all_true()
    assert hjb_residual(sol, params, gamma).max_hjb_residual <= 1e-6


def test_huge_eta_bar_thresholds_do_not_overflow():
    # eta_bar = 2 sigma^2/mu^2 ~ 170: the zero-barrier gap must be computed
    # in rescaled form or e^(eta_bar * gamma) overflows.
    params = ModelParams(delta=1.056, sigma=0.513, mu=0.120, eta=0.109)
    from periodiv.model import thresholds

    th = thresholds(params)
    assert th.gamma1 is not None and 0.0 < th.gamma2 < th.gamma1
