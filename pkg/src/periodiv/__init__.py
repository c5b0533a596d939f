"""Optimal proportional reinsurance with Poisson-timed dividend payouts.

Closed-form value functions for every parameter regime of the controlled
diffusion surplus, independent verification against the dynamic-programming
equation, and Monte Carlo validation of the optimal policy.
"""

from .errors import (
    BracketError,
    DomainError,
    NumericalError,
    RangeError,
    RegimeError,
    SolverError,
)
from .model import ModelParams, Regime, RegimeCase, Thresholds, classify, thresholds
from .valuefn import Solution, asymptotic, solve, solve_with_barrier

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "DomainError",
    "ModelParams",
    "NumericalError",
    "RangeError",
    "Regime",
    "RegimeCase",
    "RegimeError",
    "Solution",
    "SolverError",
    "Thresholds",
    "asymptotic",
    "classify",
    "solve",
    "solve_with_barrier",
    "thresholds",
    "__version__",
]
