"""Feedback controls: the retention fraction and the payout rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import DomainError, NumericalError
from .valuefn import Solution

_CLAMP_SLACK = 1e-8


@dataclass(frozen=True)
class OptimalStrategy:
    """Feedback controls induced by a constructed value function."""

    solution: Solution

    @property
    def barrier(self) -> float:
        return self.solution.b


@dataclass(frozen=True)
class ConstantRetention:
    """Keep a fixed fraction of the risk and pay out above a fixed barrier.

    The barrier may be infinite (never pay dividends).
    """

    u: float
    barrier: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.u <= 1.0):
            raise DomainError(f"retention fraction must lie in [0, 1], got {self.u}")
        if self.barrier < 0.0:
            raise DomainError(f"barrier must be nonnegative, got {self.barrier}")


Strategy = Union[OptimalStrategy, ConstantRetention]


def retention(strategy: Strategy, x: float) -> float:
    """Risk fraction kept at surplus level x.

    For the optimal strategy this is 1 at and above the switch level and the
    analytic transform-derivative formula below it.  Values may poke out of
    [0, 1] by floating-point noise only; a larger excursion means the
    solution is inconsistent and raises.
    """
    if not (x > 0.0):
        raise DomainError(f"retention is defined for x > 0, got {x}")
    if isinstance(strategy, ConstantRetention):
        return strategy.u
    u = strategy.solution.u_star(x)
    if u < -_CLAMP_SLACK or u > 1.0 + _CLAMP_SLACK:
        raise NumericalError(f"retention {u} at x={x} is inconsistent", abscissa=x)
    return min(max(u, 0.0), 1.0)


def dividend(strategy: Strategy, x: float) -> float:
    """Payout made at a decision time from pre-decision surplus x."""
    if x < 0.0:
        raise DomainError(f"surplus must be nonnegative, got {x}")
    b = strategy.barrier if isinstance(strategy, ConstantRetention) else strategy.solution.b
    return max(x - b, 0.0)
