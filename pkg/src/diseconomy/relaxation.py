"""Configuration-LP relaxation of ``min sum_j f_j(sum_i d_ij y_i)`` over a polytope.

Each term ``H_j(y)`` is the cheapest distribution over subsets ``S`` of the
term's support whose inclusion marginals equal ``y``.  It is evaluated by
column generation on the restricted primal, priced by a budgeted knapsack DP
on the dual.  The dual optimum gives an affine minorant (a subgradient) of
``H_j``, and the outer minimization over the polytope is a Kelley cutting
plane loop on one epigraph variable per term.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .lp import LPSolution, restricted_lp_solve
from .problem import InstanceTooLarge, ProblemInstance, TermData, to_fraction

__all__ = [
    "ConvergenceFailure", "DualCertificate", "EvaluatedTerm", "AffineMinorant",
    "RelaxationResult", "DiscretizationPlan", "knapsack_separate", "evaluate_H",
    "subgradient", "solve_relaxation", "discretize", "opt_bound_range",
    "estimate_opt_bound", "restricted_lp_solve", "LPSolution",
]

MAX_BUDGET = 200_000
COLUMN_FACTOR = 50
MAX_CUTS = 10_000


class ConvergenceFailure(RuntimeError):
    """An iteration cap was hit; ``lower`` and ``upper`` hold the best bounds found."""

    def __init__(self, message: str, lower: float, upper: float):
        super().__init__(f"{message} (bounds [{lower:.9g}, {upper:.9g}])")
        self.lower = lower
        self.upper = upper


@dataclass
class DualCertificate:
    """Dual point ``(xi, eta)`` of one term; ``eta`` is indexed like ``support``."""

    xi: float
    eta: np.ndarray
    support: tuple[int, ...]
    value: float

    def evaluate(self, y) -> float:
        y = np.asarray(y, dtype=float)
        if not self.support:
            return self.xi
        return self.xi + float(self.eta @ y[list(self.support)])


@dataclass
class EvaluatedTerm:
    """``H_j(y)`` with its dual certificate and primal columns ``(S, z_S)``.

    ``lower_bound`` is the Lagrangian bound ``value - max pricing violation``
    from the final pricing round.
    """

    term: int
    value: float
    certificate: DualCertificate
    columns: list[tuple[tuple[int, ...], float]]
    lower_bound: float
    iterations: int = 0


@dataclass
class AffineMinorant:
    """``y -> constant + coeffs . y`` over the full variable space."""

    constant: float
    coeffs: np.ndarray

    def __call__(self, y) -> float:
        return self.constant + float(self.coeffs @ np.asarray(y, dtype=float))


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------


def _budget_costs(term: TermData) -> np.ndarray:
    B = term.total_budget
    return np.asarray(term.cost(np.arange(B + 1) * float(term.delta)), dtype=float).reshape(B + 1)


def _knapsack_tables(weights: Sequence[int], profits: np.ndarray, B: int) -> list[np.ndarray]:
    """``V[k][b]``: best profit from items ``k..`` with weight exactly ``b`` (``-inf`` if none)."""
    m = len(weights)
    V = [None] * (m + 1)
    last = np.full(B + 1, -np.inf)
    last[0] = 0.0
    V[m] = last
    for k in range(m - 1, -1, -1):
        w = weights[k]
        cur = last.copy()
        if w <= B:
            take = np.full(B + 1, -np.inf)
            take[w:] = last[:B + 1 - w] + profits[k]
            cur = np.maximum(cur, take)
        V[k] = cur
        last = cur
    return V


def _reconstruct(V, weights, profits, b) -> list[int]:
    """Among optimal item sets for budget ``b``, the one that includes the lowest indices."""
    chosen = []
    for k in range(len(weights)):
        w = weights[k]
        if w <= b and V[k + 1][b - w] + profits[k] == V[k][b]:
            chosen.append(k)
            b -= w
    return chosen


def _price(term: TermData, xi: float, eta: np.ndarray, costs: np.ndarray,
           max_budget: int) -> tuple[float, list[int]]:
    """Largest ``xi + eta(S) - f(S)`` over all ``S`` and a set attaining it (local positions)."""
    B = term.total_budget
    if B > max_budget:
        raise InstanceTooLarge(
            f"term {term.index} needs {B} budget units (cap {max_budget}); discretize first")
    V = _knapsack_tables(term.weights, np.asarray(eta, dtype=float), B)
    viol = xi + V[0] - costs
    best = np.max(viol)
    # ties: prefer the largest budget
    b = int(np.flatnonzero(viol == best)[-1])
    return float(best), _reconstruct(V, term.weights, eta, b)


def knapsack_separate(term: TermData, xi: float, eta, tol: float = 1e-9,
                      max_budget: int = MAX_BUDGET) -> tuple[int, ...] | None:
    """A set ``S`` (variable indices) with ``xi + eta(S) > f(d(S)) + tol``, or ``None``.

    For every budget ``b`` a DP finds the best ``eta(S)`` with ``d(S) = b * delta``;
    the budget with the largest violation wins, the larger budget on ties.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (term.size,):
        raise ValueError(f"eta must have length {term.size}")
    best, items = _price(term, float(xi), eta, _budget_costs(term), max_budget)
    if best <= tol:
        return None
    return tuple(term.support[k] for k in items)


# ---------------------------------------------------------------------------
# Evaluating H_j
# ---------------------------------------------------------------------------


class ColumnPool:
    """Columns (sets of local positions) kept for one term across evaluations."""

    def __init__(self, term: TermData):
        self.term = term
        self.columns: list[tuple[int, ...]] = [()] + [(k,) for k in range(term.size)]
        self._seen = set(self.columns)
        self.costs = _budget_costs(term)

    def add(self, col: Sequence[int]) -> bool:
        col = tuple(sorted(col))
        if col in self._seen:
            return False
        self._seen.add(col)
        self.columns.append(col)
        return True

    def cost(self, col) -> float:
        return float(self.costs[sum(self.term.weights[k] for k in col)])


def _chain_columns(yl: np.ndarray) -> list[tuple[int, ...]]:
    """Nested top-``k`` sets by decreasing ``y``; they always admit a feasible ``z``."""
    order = sorted(range(len(yl)), key=lambda k: (-yl[k], k))
    return [tuple(sorted(order[:k])) for k in range(1, len(order) + 1)]


def _restricted(pool: ColumnPool, yl: np.ndarray) -> LPSolution:
    m = pool.term.size
    cols = pool.columns
    A = np.zeros((m + 1, len(cols)))
    A[0, :] = 1.0
    for c, col in enumerate(cols):
        for k in col:
            A[k + 1, c] = 1.0
    c = np.array([pool.cost(col) for col in cols])
    return restricted_lp_solve(c, A_eq=A, b_eq=np.concatenate([[1.0], yl]))


def evaluate_H(term: TermData, y, tol: float = 1e-10, pool: ColumnPool | None = None,
               max_columns: int | None = None, max_budget: int = MAX_BUDGET) -> EvaluatedTerm:
    """``H_j(y)`` by column generation.

    ``tol`` is relative to ``max(1, f(sum_i d_ij))``.  A ``pool`` from an
    earlier call on the same term warm-starts the restricted LP.
    """
    y = np.asarray(y, dtype=float)
    if term.size == 0:
        cert = DualCertificate(0.0, np.zeros(0), (), 0.0)
        return EvaluatedTerm(term.index, 0.0, cert, [((), 1.0)], 0.0)
    yl = y[list(term.support)]
    if np.any(yl < -1e-9) or np.any(yl > 1 + 1e-9):
        raise ValueError("y must lie in [0, 1] on the term's support")
    yl = np.clip(yl, 0.0, 1.0)
    if pool is None:
        pool = ColumnPool(term)
    for col in _chain_columns(yl):
        pool.add(col)
    scale = max(1.0, float(pool.costs[-1]))
    abs_tol = tol * scale
    cap = len(pool.columns) + COLUMN_FACTOR * term.size if max_columns is None else max_columns
    iterations = 0
    while True:
        iterations += 1
        sol = _restricted(pool, yl)
        if not sol.optimal:
            raise ConvergenceFailure(f"restricted LP for term {term.index} is {sol.status}",
                                     -math.inf, math.inf)
        xi, eta = float(sol.eq_duals[0]), np.asarray(sol.eq_duals[1:])
        violation, items = _price(term, xi, eta, pool.costs, max_budget)
        lower = sol.value - max(violation, 0.0)
        if violation <= abs_tol:
            break
        if not pool.add(items) or len(pool.columns) > cap:
            if violation <= 1e3 * abs_tol:
                break
            raise ConvergenceFailure(f"column generation for term {term.index} stalled",
                                     lower, sol.value)
    cert = DualCertificate(xi, eta, term.support, xi + float(eta @ yl))
    columns = [(tuple(term.support[k] for k in col), float(z))
               for col, z in zip(pool.columns, sol.x) if z > 1e-12]
    return EvaluatedTerm(term.index, float(sol.value), cert, columns, lower, iterations)


def subgradient(cert: DualCertificate, dimension: int | None = None) -> AffineMinorant:
    """The affine minorant ``y -> xi + sum_i eta_i y_i`` of ``H_j``."""
    n = (max(cert.support) + 1 if cert.support else 0) if dimension is None else dimension
    coeffs = np.zeros(n)
    if cert.support:
        coeffs[list(cert.support)] = cert.eta
    return AffineMinorant(cert.xi, coeffs)


# ---------------------------------------------------------------------------
# Master problem
# ---------------------------------------------------------------------------


@dataclass
class RelaxationResult:
    y: np.ndarray
    lp_value: float
    lower_bound: float
    terms: list[EvaluatedTerm]
    iterations: int
    cuts: int
    timings: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``y, value, terms = solve_relaxation(...)``
        return iter((self.y, self.lp_value, self.terms))

    @property
    def per_term_values(self) -> list[float]:
        return [t.value for t in self.terms]


def _upper_value(problem: ProblemInstance, y, pools, tol) -> tuple[float, list[EvaluatedTerm]]:
    evals = [evaluate_H(t, y, tol=tol, pool=p) for t, p in zip(problem.terms, pools)]
    value = math.fsum(e.value for e in evals)
    if problem.linear is not None:
        value += float(problem.linear @ y)
    return value, evals


def solve_relaxation(problem: ProblemInstance, eps: float = 0.01, *, tol: float = 1e-10,
                     max_cuts: int = MAX_CUTS, separation_tol: float = 1e-9) -> RelaxationResult:
    """Minimize ``sum_j H_j(y) + linear . y`` over the polytope up to factor ``1 + eps``.

    Kelley's method: the master LP over ``(y, theta)`` carries the polytope's
    explicit rows, lazily separated rows, and one cut
    ``theta_j >= xi + eta . y`` per evaluated term and iterate.  Stops when
    the best evaluated value is within ``(1 + eps)`` of the master bound.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    start = time.perf_counter()
    n, k = problem.dimension, len(problem.terms)
    poly = problem.polytope
    cons = poly.explicit_constraints()
    N = n + k
    if N == 0:
        return RelaxationResult(np.zeros(0), 0.0, 0.0, [], 0, 0, {"total_s": 0.0})

    def lift(A):
        return np.hstack([A, np.zeros((A.shape[0], k))])

    A_eq, b_eq = lift(cons.A_eq), cons.b_eq
    ub_rows = [lift(cons.A_ub)] if cons.A_ub.shape[0] else []
    ub_rhs = [cons.b_ub] if cons.A_ub.shape[0] else []
    c = np.concatenate([np.zeros(n) if problem.linear is None else problem.linear, np.ones(k)])
    ub = problem.upper_bounds()
    bounds = [(0.0, float(u)) for u in ub] + [(0.0, None)] * k
    pools = [ColumnPool(t) for t in problem.terms]

    best_y, best_val, best_evals = None, math.inf, None
    lower = -math.inf
    cuts = iterations = 0
    master_time = eval_time = 0.0
    while True:
        iterations += 1
        t0 = time.perf_counter()
        A_ub = np.vstack(ub_rows) if ub_rows else None
        b_ub = np.concatenate(ub_rhs) if ub_rhs else None
        sol = restricted_lp_solve(c, A_ub, b_ub, A_eq if A_eq.shape[0] else None,
                                  b_eq if A_eq.shape[0] else None, bounds)
        master_time += time.perf_counter() - t0
        if sol.status == "infeasible":
            from .polytopes import InfeasiblePolytope
            raise InfeasiblePolytope("the relaxation's polytope is empty")
        if not sol.optimal:
            raise ConvergenceFailure(f"master LP is {sol.status}", lower, best_val)
        y = np.clip(sol.x[:n], 0.0, ub)
        lower = max(lower, float(sol.value))

        cut = poly.separate(y, separation_tol)
        if cut is not None:
            if cut.sense == "==":
                A_eq = np.vstack([A_eq, np.concatenate([cut.coeffs, np.zeros(k)])])
                b_eq = np.append(b_eq, cut.rhs)
            else:
                ub_rows.append(np.concatenate([cut.coeffs, np.zeros(k)])[None, :])
                ub_rhs.append(np.array([cut.rhs]))
            cuts += 1
            if cuts > max_cuts:
                raise ConvergenceFailure("cut limit reached", lower, best_val)
            continue

        t0 = time.perf_counter()
        value, evals = _upper_value(problem, y, pools, tol)
        eval_time += time.perf_counter() - t0
        if value < best_val:
            best_y, best_val, best_evals = y.copy(), value, evals
        if best_val <= (1 + eps) * lower + 1e-12 * max(1.0, abs(lower)):
            break
        added = 0
        for j, (term, ev) in enumerate(zip(problem.terms, evals)):
            theta = sol.x[n + j]
            if ev.value <= theta + 1e-12 * max(1.0, ev.value):
                continue
            row = np.zeros(N)
            row[list(term.support)] = ev.certificate.eta
            row[n + j] = -1.0
            ub_rows.append(row[None, :])
            ub_rhs.append(np.array([-ev.certificate.xi]))
            added += 1
        cuts += added
        if added == 0:
            # master already exact at y up to solver tolerance
            break
        if cuts > max_cuts:
            raise ConvergenceFailure("cut limit reached", lower, best_val)

    timings = {"master_s": master_time, "evaluate_s": eval_time,
               "total_s": time.perf_counter() - start}
    return RelaxationResult(best_y, best_val, min(lower, best_val), best_evals, iterations,
                            cuts, timings)


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


@dataclass
class DiscretizationPlan:
    forced_zero: frozenset[int]
    deltas: list[Fraction]
    scales: list[Fraction]
    coefficients: list[dict[int, Fraction]]
    eps: Fraction
    eta: Fraction
    smoothness: float


def _smoothness(problem: ProblemInstance, override) -> float:
    if override is not None:
        return float(override)
    values = []
    for t in problem.terms:
        s = t.cost.smoothness
        if s is None:
            raise ValueError(f"term {t.index}: cost has no smoothness bound; supply one")
        values.append(float(s))
    return max(values, default=1.0)


def discretize(problem: ProblemInstance, eps: float, opt_bound: float,
               smoothness: float | None = None) -> tuple[ProblemInstance, DiscretizationPlan]:
    """Round coefficients down to multiples of ``delta_j`` and fix expensive variables to 0.

    A variable is fixed when any single coefficient already costs more than
    ``opt_bound``.  With ``eta = min(eps / (4 P), 1/2)`` and
    ``t_j = max`` of the remaining coefficients, ``delta_j = eps eta t_j / (k n)``.
    """
    if opt_bound <= 0:
        raise ValueError("opt_bound must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    P = _smoothness(problem, smoothness)
    epsf = to_fraction(eps)
    eta = min(epsf / to_fraction(4 * P), Fraction(1, 2))
    k, n = max(len(problem.terms), 1), problem.dimension

    forced = set(problem.fixed_zero)
    for t in problem.terms:
        for i, d in zip(t.support, t.coeffs):
            if float(t.cost(float(d))) > opt_bound:
                forced.add(i)

    new_terms, deltas, scales, coeffs = [], [], [], []
    for t in problem.terms:
        kept = [(i, d) for i, d in zip(t.support, t.coeffs) if i not in forced]
        t_j = max((d for _, d in kept), default=Fraction(0))
        if t_j == 0:
            delta = Fraction(1)
            rounded = {}
        else:
            delta = epsf * eta * t_j / (k * n)
            rounded = {i: (d // delta) * delta for i, d in kept}
            rounded = {i: d for i, d in rounded.items() if d > 0}
        deltas.append(delta)
        scales.append(t_j)
        coeffs.append(rounded)
        new_terms.append(TermData.build(t.index, rounded, t.cost, delta=delta))
    new = ProblemInstance(new_terms, problem.polytope, problem.linear, frozenset(forced),
                          problem.kind, problem.source)
    plan = DiscretizationPlan(frozenset(forced), deltas, scales, coeffs, epsf, eta, P)
    return new, plan


def opt_bound_range(problem: ProblemInstance) -> tuple[float, float]:
    """``(min_ij f_j(d_ij), sum_j f_j(sum_i d_ij))`` over positive single-coefficient costs."""
    singles = [float(t.cost(float(d))) for t in problem.terms for d in t.coeffs]
    singles = [v for v in singles if v > 0]
    hi = math.fsum(float(t.cost(float(sum(t.coeffs)))) for t in problem.terms)
    return (min(singles) if singles else 0.0), hi


def estimate_opt_bound(problem: ProblemInstance) -> Iterator[float]:
    """Powers of two covering ``opt_bound_range``, smallest first."""
    return power_of_two_candidates(*opt_bound_range(problem))


def power_of_two_candidates(lo: float, hi: float) -> Iterator[float]:
    """``2^ceil(log2 lo), ...`` up to the first power ``>= hi``; just ``0`` for an empty range."""
    if hi <= 0 or lo <= 0:
        yield 0.0
        return
    e = math.ceil(math.log2(lo))
    while True:
        v = math.ldexp(1.0, e)
        yield v
        if v >= hi:
            return
        e += 1


def naive_convex_relaxation(problem: ProblemInstance) -> tuple[float, np.ndarray]:
    """``min sum_j f_j(sum_i d_ij y_i)`` over the polytope with ``y`` fractional.

    This direct relaxation is the weak baseline the configuration LP improves on.
    """
    from scipy.optimize import minimize
    cons = problem.polytope.full_constraints()
    n = problem.dimension
    lin = np.zeros(n) if problem.linear is None else problem.linear

    def objective(y):
        return sum(t.value(y) for t in problem.terms) + float(lin @ y)

    def gradient(y):
        g = lin.astype(float).copy()
        for t in problem.terms:
            load = t.load(y)
            h = 1e-7 * max(1.0, abs(load))
            slope = (float(t.cost(load + h)) - float(t.cost(max(load - h, 0.0)))) / \
                (load + h - max(load - h, 0.0))
            g[list(t.support)] += slope * t.coeff_array()
        return g

    constraints = []
    # SLSQP needs linearly independent equality rows
    keep = []
    for r in range(cons.A_eq.shape[0]):
        if np.linalg.matrix_rank(cons.A_eq[keep + [r]]) > len(keep):
            keep.append(r)
    A_eq, b_eq = cons.A_eq[keep], cons.b_eq[keep]
    if keep:
        constraints.append({"type": "eq", "fun": lambda y: A_eq @ y - b_eq,
                            "jac": lambda y: A_eq})
    if cons.A_ub.shape[0]:
        constraints.append({"type": "ineq", "fun": lambda y: cons.b_ub - cons.A_ub @ y,
                            "jac": lambda y: -cons.A_ub})
    ub = problem.upper_bounds()
    # start inside: average of vertices for a few random positive cost vectors
    gen = np.random.default_rng(0)
    y0 = np.mean([problem.polytope.linear_minimize(gen.random(n) + 0.5 * (ub <= 0))
                  for _ in range(2 * n + 1)], axis=0) if n else np.zeros(0)
    res = minimize(objective, y0, jac=gradient, method="SLSQP", bounds=list(zip(np.zeros(n), ub)),
                   constraints=constraints, options={"ftol": 1e-12, "maxiter": 500})
    return float(res.fun), res.x
