"""Boolean convex programs ``min sum_j f_j(sum_i d_ij y_i)`` over a polytope."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .moments import CostFunction


def to_fraction(x) -> Fraction:
    """Exact rational from int, Fraction, decimal string, or float (via its repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coefficient {x}")
        return Fraction(repr(float(x)))
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def fraction_gcd(values) -> Fraction:
    """Largest rational ``g`` such that every value is an integer multiple of ``g``."""
    vals = [v for v in values if v != 0]
    if not vals:
        return Fraction(1)
    den = math.lcm(*(v.denominator for v in vals))
    num = math.gcd(*(int(v * den) for v in vals))
    return Fraction(num, den)


class InstanceTooLarge(ValueError):
    """Raised when a term's knapsack budget exceeds the configured bound."""


@dataclass(frozen=True)
class TermData:
    """One cost term ``f_j(sum_{i in D_j} d_ij y_i)``.

    ``support`` lists the variables with ``d_ij != 0`` in ascending order;
    ``coeffs`` are the matching exact rational coefficients, each an integer
    multiple of ``delta``.
    """

    index: int
    support: tuple[int, ...]
    coeffs: tuple[Fraction, ...]
    cost: CostFunction
    delta: Fraction = Fraction(1)
    weights: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.support) != len(self.coeffs):
            raise ValueError("support and coeffs differ in length")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be strictly ascending")
        if self.delta <= 0:
            raise ValueError(f"granularity must be positive, got {self.delta}")
        weights = []
        for i, d in zip(self.support, self.coeffs):
            if d <= 0:
                raise ValueError(f"coefficient of variable {i} must be positive, got {d}")
            w = d / self.delta
            if w.denominator != 1:
                raise ValueError(f"coefficient {d} of variable {i} is not a multiple of {self.delta}")
            weights.append(int(w))
        object.__setattr__(self, "weights", tuple(weights))

    @classmethod
    def build(cls, index: int, coeffs: Mapping[int, Any], cost: CostFunction,
              delta=None) -> "TermData":
        """Term from a ``{variable: coefficient}`` map; zero coefficients are dropped.

        Without an explicit ``delta`` the granularity is the rational gcd of the
        coefficients.
        """
        items = sorted((int(i), to_fraction(d)) for i, d in coeffs.items())
        if any(d < 0 for _, d in items):
            raise ValueError("coefficients must be nonnegative")
        items = [(i, d) for i, d in items if d != 0]
        delta = fraction_gcd([d for _, d in items]) if delta is None else to_fraction(delta)
        return cls(index, tuple(i for i, _ in items), tuple(d for _, d in items), cost, delta)

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def total_budget(self) -> int:
        """Number of ``delta`` units in ``sum_i d_ij``."""
        return sum(self.weights)

    def coeff_array(self) -> np.ndarray:
        return np.array([float(d) for d in self.coeffs])

    def load(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        if not self.support:
            return 0.0
        return float(self.coeff_array() @ y[list(self.support)])

    def value(self, y: np.ndarray) -> float:
        return float(self.cost(self.load(y)))

    def set_cost(self, local_items) -> float:
        """``f_j`` of the coefficient sum over ``local_items`` (positions in ``support``)."""
        units = sum(self.weights[k] for k in local_items)
        return float(self.cost(float(units * self.delta)))


@dataclass
class ProblemInstance:
    """``min sum_j f_j(sum_i d_ij y_i) + linear . y`` over ``y`` in a polytope, ``y`` boolean.

    ``fixed_zero`` lists variables forced to zero (e.g. by discretization).
    """

    terms: list[TermData]
    polytope: Any
    linear: np.ndarray | None = None
    fixed_zero: frozenset[int] = frozenset()
    kind: str = "generic"
    source: Any = None

    @property
    def dimension(self) -> int:
        return self.polytope.dimension

    def objective(self, y) -> float:
        y = np.asarray(y, dtype=float)
        total = math.fsum(t.value(y) for t in self.terms)
        if self.linear is not None:
            total += float(self.linear @ y)
        return total

    def upper_bounds(self) -> np.ndarray:
        ub = np.array(self.polytope.upper_bounds, dtype=float)
        if self.fixed_zero:
            ub[list(self.fixed_zero)] = 0.0
        return ub
