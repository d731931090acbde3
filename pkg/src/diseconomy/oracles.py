"""Brute-force ground truth for small instances.

These enumerate exponentially many objects and exist to validate the
polynomial-time routines; the CLI only reaches them behind ``--oracle``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .lp import restricted_lp_solve
from .polytopes import (LoadBalancingInstance, RoutingInstance, SchedulingInstance,
                        TreeInstance, _UnionFind)
from .problem import ProblemInstance, TermData


class BudgetExceeded(RuntimeError):
    """Enumeration stopped at its budget; no answer is returned."""


@dataclass
class ExhaustiveBudget:
    max_count: int = 10**7
    time_cap: float | None = None

    def __post_init__(self):
        self.count = 0
        self._start = time.perf_counter()

    def tick(self, n: int = 1):
        self.count += n
        if self.count > self.max_count:
            raise BudgetExceeded(f"enumeration passed {self.max_count} items")
        if self.time_cap is not None and time.perf_counter() - self._start > self.time_cap:
            raise BudgetExceeded(f"enumeration passed {self.time_cap} s")


# ---------------------------------------------------------------------------
# Integral optimum
# ---------------------------------------------------------------------------


def brute_force_opt(instance, budget: ExhaustiveBudget | None = None):
    """``(solution, OPT)`` by exhaustive enumeration; ties keep the first found."""
    budget = budget or ExhaustiveBudget()
    if isinstance(instance, RoutingInstance):
        return _routing_opt(instance, budget)
    if isinstance(instance, LoadBalancingInstance):
        return _loadbalance_opt(instance, budget)
    if isinstance(instance, TreeInstance):
        return _tree_opt(instance, budget)
    if isinstance(instance, SchedulingInstance):
        return _schedule_opt(instance, budget)
    if isinstance(instance, ProblemInstance):
        return _generic_opt(instance, budget)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _routing_opt(inst: RoutingInstance, budget):
    from .polytopes import flow_polytope
    poly = flow_polytope(inst)
    options = [poly.simple_paths(i) for i in range(len(inst.demands))]
    best, best_val = None, math.inf
    for combo in itertools.product(*options):
        budget.tick()
        loads = np.zeros(len(inst.edges))
        for d, path in zip(inst.demands, combo):
            loads[path] += d.size
        val = sum(float(e.scale) * float(x) ** float(e.exponent)
                  for e, x in zip(inst.edges, loads) if x > 0)
        if val < best_val:
            best, best_val = [tuple(p) for p in combo], val
    return best, best_val


def _loadbalance_opt(inst: LoadBalancingInstance, budget):
    q = float(inst.exponent)
    choices = [[i for i in range(inst.machines) if inst.processing[i][j] is not None]
               for j in range(inst.jobs)]
    best, best_val = None, math.inf
    for assignment in itertools.product(*choices):
        budget.tick()
        loads = [0.0] * inst.machines
        for j, i in enumerate(assignment):
            loads[i] += inst.processing[i][j]
        val = sum(x ** q for x in loads)
        if val < best_val:
            best, best_val = list(assignment), val
    return best, best_val


def _tree_opt(inst: TreeInstance, budget):
    nv = inst.num_vertices
    q = float(inst.exponent)
    best, best_val = None, math.inf
    for combo in itertools.combinations(range(len(inst.edges)), nv - 1):
        budget.tick()
        uf = _UnionFind(nv)
        if not all(uf.union(inst.edges[k][0], inst.edges[k][1]) for k in combo):
            continue
        deg = [0.0] * nv
        for k in combo:
            u, v, w = inst.edges[k]
            deg[u] += float(w)
            deg[v] += float(w)
        val = sum(x ** q for x in deg)
        if val < best_val:
            best, best_val = combo, val
    return best, best_val


def _schedule_opt(inst: SchedulingInstance, budget):
    """All machine assignments times all per-machine orders, processed without idle time."""
    p = float(inst.exponent)
    best, best_val = None, math.inf
    for assignment in itertools.product(range(inst.machines), repeat=inst.jobs):
        groups = [[j for j in range(inst.jobs) if assignment[j] == i] for i in range(inst.machines)]
        for orders in itertools.product(*[itertools.permutations(g) for g in groups]):
            budget.tick()
            completion = [0] * inst.jobs
            for i, order in enumerate(orders):
                clock = 0
                for j in order:
                    clock += inst.processing[i][j]
                    completion[j] = clock
            val = sum(float(w) * c ** p for w, c in zip(inst.weights, completion))
            if val < best_val:
                best, best_val = (list(assignment), [list(o) for o in orders]), val
    return best, best_val


def _generic_opt(problem: ProblemInstance, budget):
    best, best_val = None, math.inf
    fixed = list(problem.fixed_zero)
    for y in problem.polytope.list_vertices():
        budget.tick()
        if fixed and np.any(y[fixed] > 0):
            continue
        val = problem.objective(y)
        if val < best_val:
            best, best_val = y, val
    return best, best_val


# ---------------------------------------------------------------------------
# The relaxation with every column written out
# ---------------------------------------------------------------------------


MAX_EXPLICIT_SUPPORT = 12


def _subsets(m: int):
    return [tuple(c) for r in range(m + 1) for c in itertools.combinations(range(m), r)]


def explicit_H(term: TermData, y) -> float:
    """``H_j(y)`` with all ``2^|D_j|`` columns."""
    y = np.asarray(y, dtype=float)
    m = term.size
    if m == 0:
        return 0.0
    if m > MAX_EXPLICIT_SUPPORT:
        raise BudgetExceeded(f"term support {m} exceeds {MAX_EXPLICIT_SUPPORT}")
    cols = _subsets(m)
    A = np.zeros((m + 1, len(cols)))
    A[0] = 1.0
    for c, col in enumerate(cols):
        A[[k + 1 for k in col], c] = 1.0
    cost = np.array([term.set_cost(col) for col in cols])
    b = np.concatenate([[1.0], np.clip(y[list(term.support)], 0.0, 1.0)])
    sol = restricted_lp_solve(cost, A_eq=A, b_eq=b)
    if not sol.optimal:
        raise ValueError(f"explicit LP for term {term.index} is {sol.status}")
    return sol.value


@dataclass
class ExplicitLP:
    value: float
    y: np.ndarray


def explicit_lp_opt(problem: ProblemInstance, fixed_y=None,
                    budget: ExhaustiveBudget | None = None) -> ExplicitLP:
    """Optimum of the configuration LP with all ``z_{jS}`` columns and all polytope rows."""
    budget = budget or ExhaustiveBudget()
    n = problem.dimension
    blocks = []
    for term in problem.terms:
        if term.size > MAX_EXPLICIT_SUPPORT:
            raise BudgetExceeded(f"term {term.index} support {term.size} exceeds "
                                 f"{MAX_EXPLICIT_SUPPORT}")
        cols = _subsets(term.size)
        budget.tick(len(cols))
        blocks.append(cols)
    nz = sum(len(b) for b in blocks)
    N = n + nz
    c = np.zeros(N)
    if problem.linear is not None:
        c[:n] = problem.linear
    eq_rows, eq_rhs = [], []
    offset = n
    for term, cols in zip(problem.terms, blocks):
        c[offset:offset + len(cols)] = [term.set_cost(col) for col in cols]
        row = np.zeros(N)
        row[offset:offset + len(cols)] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
        for k, i in enumerate(term.support):
            row = np.zeros(N)
            row[i] = -1.0
            for ci, col in enumerate(cols):
                if k in col:
                    row[offset + ci] = 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)
        offset += len(cols)
    cons = problem.polytope.full_constraints()
    pad = lambda A: np.hstack([A, np.zeros((A.shape[0], nz))])
    A_eq = np.vstack([pad(cons.A_eq)] + ([np.array(eq_rows)] if eq_rows else []))
    b_eq = np.concatenate([cons.b_eq, eq_rhs])
    A_ub, b_ub = pad(cons.A_ub), cons.b_ub
    ub = problem.upper_bounds()
    if fixed_y is not None:
        fy = np.asarray(fixed_y, dtype=float)
        bounds = [(float(v), float(v)) for v in fy] + [(0.0, None)] * nz
    else:
        bounds = [(0.0, float(u)) for u in ub] + [(0.0, None)] * nz
    sol = restricted_lp_solve(c, A_ub, b_ub, A_eq, b_eq, bounds)
    if not sol.optimal:
        raise ValueError(f"explicit LP is {sol.status}")
    return ExplicitLP(sol.value, sol.x[:n])


# ---------------------------------------------------------------------------
# LP by vertex enumeration
# ---------------------------------------------------------------------------


def lp_by_vertex_enumeration(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None),
                             tol: float = 1e-9) -> tuple[float, np.ndarray | None]:
    """Minimum over all basic feasible points of a small bounded LP.

    Returns ``(inf, None)`` when no basic point is feasible.
    """
    from .lp import _bounds_arrays
    c = np.asarray(c, dtype=float)
    n = c.size
    G, h = [], []
    if A_ub is not None and len(A_ub):
        G.append(np.asarray(A_ub, dtype=float).reshape(-1, n))
        h.append(np.asarray(b_ub, dtype=float))
    eq = None
    if A_eq is not None and len(A_eq):
        eq = (np.asarray(A_eq, dtype=float).reshape(-1, n), np.asarray(b_eq, dtype=float))
        G += [eq[0], -eq[0]]
        h += [eq[1], -eq[1]]
    lo, hi = _bounds_arrays(bounds, n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        if np.isfinite(lo[k]):
            G.append(-e[None, :])
            h.append(np.array([-lo[k]]))
        if np.isfinite(hi[k]):
            G.append(e[None, :])
            h.append(np.array([hi[k]]))
    G = np.vstack(G) if G else np.zeros((0, n))
    h = np.concatenate(h) if h else np.zeros(0)
    best, best_x = math.inf, None
    for rows in itertools.combinations(range(G.shape[0]), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + tol * (1 + np.abs(h))):
            val = float(c @ x)
            if val < best - 1e-12:
                best, best_x = val, x
    return best, best_x
