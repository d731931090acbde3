"""Configuration-LP relaxations and randomized rounding for costs with diseconomies of scale."""

from .moments import (PowerCost, TabulatedConcave, TabulatedConvex, amplification_factor,
                      concave_gain, fractional_bell)
from .problem import ProblemInstance, TermData
from .relaxation import discretize, evaluate_H, knapsack_separate, solve_relaxation

__version__ = "0.1.0"

__all__ = [
    "PowerCost", "TabulatedConvex", "TabulatedConcave", "fractional_bell", "amplification_factor",
    "concave_gain", "ProblemInstance", "TermData", "solve_relaxation", "evaluate_H",
    "knapsack_separate", "discretize",
]
