"""Poisson moment quantities.

``A_q = E[P^q]`` for ``P ~ Poisson(1)`` (the fractional Bell numbers), the
amplification factor ``A(f) = sup_t E[f(tP)] / f(t)`` of a convex cost, and
the concave gain ``B(g) = inf_t E[g(tP)] / g(t)``.

All series are truncated with a certified tail bound; factorials are handled
in log space so large supports never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_SUPPORT_CAP = 100_000


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain."""


class DegenerateFunctionError(ValueError):
    """Raised when a ratio E[f(tP)]/f(t) is undefined everywhere on the grid."""


# ---------------------------------------------------------------------------
# Poisson pmf and truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonTruncation:
    """Truncation point for a Poisson series ``sum_t t^power pmf(t)``.

    ``tail_mass_bound`` bounds ``sum_{t > max_support} t^power pmf(t)``.
    """

    max_support: int
    tail_mass_bound: float
    rate: float = 1.0
    power: float = 0.0


def log_poisson_pmf(t: np.ndarray | int, rate: float = 1.0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if rate == 0.0:
        return np.where(t == 0, 0.0, -np.inf)
    return t * math.log(rate) - rate - _lgamma(t + 1.0)


def poisson_pmf(max_support: int, rate: float = 1.0) -> np.ndarray:
    """pmf values for ``t = 0, ..., max_support``."""
    return np.exp(log_poisson_pmf(np.arange(max_support + 1), rate))


_lgamma = np.vectorize(math.lgamma, otypes=[float])


def _tail_bound(T: int, power: float, rate: float) -> float:
    """Bound on ``sum_{t > T} t^power pmf(t)`` via a geometric ratio argument.

    For ``t >= T + 1`` consecutive terms shrink by at most
    ``(1 + 1/(T+1))^power * rate / (T + 2)``. Returns ``inf`` while that
    ratio is not yet below one.
    """
    rho = (1.0 + 1.0 / (T + 1)) ** power * rate / (T + 2)
    if rho >= 1.0:
        return math.inf
    first = math.exp(power * math.log(T + 1) + float(log_poisson_pmf(T + 1, rate)))
    return first / (1.0 - rho)


def poisson_truncation(power: float, tol: float, rate: float = 1.0,
                       scale: float = 1.0) -> PoissonTruncation:
    """Smallest ``T`` with ``scale * sum_{t>T} t^power pmf(t) < tol / 2``."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if rate < 0:
        raise DomainError(f"Poisson rate must be nonnegative, got {rate}")
    if rate == 0.0:
        return PoissonTruncation(0, 0.0, rate, power)
    T = 0
    while T <= MAX_SUPPORT_CAP:
        bound = scale * _tail_bound(T, power, rate)
        if bound < tol / 2:
            return PoissonTruncation(T, bound, rate, power)
        T += 1
    raise DomainError(
        f"no truncation below {MAX_SUPPORT_CAP} reaches tol={tol} "
        f"(power={power}, scale={scale})")


def poisson_moment(q: float, max_support: int, rate: float = 1.0) -> float:
    """Truncated series ``sum_{t=1}^{max_support} t^q pmf(t)``."""
    t = np.arange(1, max_support + 1, dtype=float)
    terms = np.exp(q * np.log(t) + log_poisson_pmf(t, rate))
    return math.fsum(terms)


def fractional_bell(q: float, tol: float = 1e-12) -> float:
    """The ``q``-th moment of a Poisson(1) variable, within ``tol``.

    Integer ``q`` gives the Bell numbers (``A_2 = 2``, ``A_3 = 5``).
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not q >= 1:
        raise DomainError(f"fractional Bell numbers need q >= 1, got {q}")
    if q == 1:
        return 1.0
    trunc = poisson_truncation(q, tol)
    return poisson_moment(q, trunc.max_support)


# ---------------------------------------------------------------------------
# Cost functions
# ---------------------------------------------------------------------------


class CostFunction:
    """Nonnegative nondecreasing cost ``f`` with ``f(0) = 0``.

    Subclasses provide ``__call__`` (vectorized over numpy arrays) and a
    linear-or-power growth bound ``f(x) <= growth_scale * x**growth_power``
    used to truncate Poisson expectations.
    """

    smoothness: float | None = None

    def __call__(self, t):
        raise NotImplementedError

    @property
    def growth_power(self) -> float:
        raise NotImplementedError

    @property
    def growth_scale(self) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerCost(CostFunction):
    """``f(t) = scale * t**exponent``."""

    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise DomainError(f"scale must be nonnegative, got {self.scale}")
        if not self.exponent >= 1:
            raise DomainError(f"exponent must be >= 1, got {self.exponent}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.scale * np.power(t, self.exponent)
        return float(out) if out.ndim == 0 else out

    @property
    def smoothness(self) -> float:
        # t (log f(t))' = exponent
        return float(self.exponent)

    @property
    def growth_power(self) -> float:
        return float(self.exponent)

    @property
    def growth_scale(self) -> float:
        return float(self.scale)

    def to_json(self) -> dict:
        return {"type": "power", "scale": str(self.scale), "exponent": str(self.exponent)}


@dataclass(frozen=True)
class _Tabulated(CostFunction):
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    smoothness: float | None = None
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", tuple(bp.tolist()))
        object.__setattr__(self, "values", tuple(vals.tolist()))
        if bp.ndim != 1 or bp.shape != vals.shape or len(bp) < 2:
            raise ValueError("need at least two breakpoints with matching values")
        if bp[0] != 0.0 or vals[0] != 0.0:
            raise ValueError("tabulated functions must start at (0, 0)")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly ascending")
        if np.any(np.diff(vals) < 0):
            raise ValueError("tabulated cost must be nondecreasing")
        object.__setattr__(self, "_slopes", np.diff(vals) / np.diff(bp))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        out = np.interp(t, bp, vals)
        beyond = t > bp[-1]
        if np.any(beyond):
            out = np.where(beyond, vals[-1] + self._slopes[-1] * (t - bp[-1]), out)
        return float(out) if out.ndim == 0 else out

    @property
    def slopes(self) -> np.ndarray:
        return self._slopes

    @property
    def growth_power(self) -> float:
        return 1.0

    @property
    def growth_scale(self) -> float:
        # f(0) = 0 and piecewise linear, so f(x) <= (max slope) * x
        return float(np.max(self._slopes))

    @classmethod
    def from_function(cls, fn, breakpoints: Sequence[float], **kwargs):
        bp = np.asarray(breakpoints, dtype=float)
        return cls(tuple(bp), tuple(float(fn(b)) for b in bp), **kwargs)

    def to_json(self) -> dict:
        out = {"type": self._kind, "breakpoints": [repr(b) for b in self.breakpoints],
               "values": [repr(v) for v in self.values]}
        if self.smoothness is not None:
            out["smoothness"] = repr(self.smoothness)
        return out


_SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class TabulatedConvex(_Tabulated):
    """Piecewise-linear convex cost; beyond the last breakpoint the last slope continues.

    ``smoothness`` is an upper bound on ``t (log f(t))'`` and is needed only
    for discretization.
    """

    _kind = "tabulated"

    def __post_init__(self):
        super().__post_init__()
        s = self._slopes
        if np.any(np.diff(s) < -_SLOPE_TOL * np.maximum(1.0, np.abs(s[:-1]))):
            raise ValueError("tabulated cost is not convex (secant slopes decrease)")


@dataclass(frozen=True)
class TabulatedConcave(_Tabulated):
    """Piecewise-linear concave nondecreasing function with ``g(0) = 0``."""

    _kind = "tabulated-concave"

    def __post_init__(self):
        super().__post_init__()
        s = self._slopes
        if np.any(np.diff(s) > _SLOPE_TOL * np.maximum(1.0, np.abs(s[:-1]))):
            raise ValueError("function is not concave (secant slopes increase)")

    @property
    def growth_scale(self) -> float:
        return float(self._slopes[0])


def cost_from_json(doc: dict) -> CostFunction:
    kind = doc.get("type", "power")
    if kind == "power":
        return PowerCost(float(doc.get("scale", 1)), float(doc["exponent"]))
    if kind == "tabulated":
        sm = doc.get("smoothness")
        return TabulatedConvex(tuple(float(b) for b in doc["breakpoints"]),
                               tuple(float(v) for v in doc["values"]),
                               None if sm is None else float(sm))
    raise ValueError(f"unknown cost function type {kind!r}")


# ---------------------------------------------------------------------------
# A(f) and B(g)
# ---------------------------------------------------------------------------


def _poisson_scaled_means(f: CostFunction, ts: np.ndarray, tol_rel: float) -> np.ndarray:
    """E[f(tP)] for each t in ``ts`` with tail error below ``tol_rel * f(t) / 2``."""
    ft = np.asarray(f(ts), dtype=float)
    # tail <= growth_scale * t^r * sum_{k>T} k^r pmf(k); pick one T for the worst t
    worst = np.max(f.growth_scale * ts ** f.growth_power / ft)
    trunc = poisson_truncation(f.growth_power, tol_rel, scale=max(worst, 1e-300))
    k = np.arange(trunc.max_support + 1, dtype=float)
    pmf = poisson_pmf(trunc.max_support)
    vals = np.asarray(f(np.outer(ts, k)), dtype=float)
    return vals @ pmf


def _ratio_grid(f: CostFunction, t_max: float, n: int, breakpoints) -> np.ndarray:
    grid = np.geomspace(t_max * 1e-6, t_max, n)
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        grid = np.union1d(grid, bp[(bp > 0) & (bp <= t_max)])
    grid = grid[np.asarray(f(grid), dtype=float) > 0]
    return grid


def _grid_extremum(f: CostFunction, t_max: float, tol: float, sense: str,
                   max_points: int = 1 << 16) -> tuple[float, float]:
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    pick = np.argmax if sense == "max" else np.argmin
    breakpoints = getattr(f, "breakpoints", None)
    best = None
    n = 64
    while n <= max_points:
        grid = _ratio_grid(f, t_max, n, breakpoints)
        if grid.size == 0:
            raise DegenerateFunctionError("f(t) = 0 at every sampled t in (0, t_max]")
        ratios = _poisson_scaled_means(f, grid, tol) / np.asarray(f(grid), dtype=float)
        idx = int(pick(ratios))
        cur = (float(ratios[idx]), float(grid[idx]))
        if best is not None and abs(cur[0] - best[0]) <= tol:
            return cur
        best = cur
        n *= 2
    return best


def amplification_search(f: CostFunction, t_max: float = 1.0,
                         tol: float = 1e-6) -> tuple[float, float]:
    """``(A(f), t*)``: the sup of ``E[f(tP)]/f(t)`` over a refined grid of ``(0, t_max]``."""
    if isinstance(f, PowerCost):
        if f.scale == 0:
            raise DegenerateFunctionError("f is identically zero")
        return fractional_bell(f.exponent, min(tol, 1e-12)), t_max
    return _grid_extremum(f, t_max, tol, "max")


def amplification_factor(f: CostFunction, t_max: float = 1.0, tol: float = 1e-6) -> float:
    """``A(f) = sup_t E[f(tP)] / f(t)``; equals ``A_q`` for ``c t^q`` regardless of ``c``.

    For tabulated costs the supremum is restricted to ``(0, t_max]``.
    """
    return amplification_search(f, t_max, tol)[0]


def concave_gain(g: _Tabulated, t_max: float = 1.0, tol: float = 1e-6) -> float:
    """``B(g) = inf_t E[g(tP)] / g(t)`` over a refined grid of ``(0, t_max]``.

    Always at least ``1 - 1/e``.
    """
    if not isinstance(g, _Tabulated):
        raise TypeError("concave_gain expects a tabulated function")
    s = g.slopes
    if np.any(np.diff(s) > _SLOPE_TOL * np.maximum(1.0, np.abs(s[:-1]))):
        raise ValueError("function is not concave (secant slopes increase)")
    return _grid_extremum(g, t_max, tol, "min")[0]
