"""Randomized rounding of fractional solutions for the four applications.

All randomness comes from :class:`RngStream`, which derives an independent
numpy generator for every (trial, entity) path from one integer seed, so
demands and jobs are drawn from separate substreams and runs replay exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .polytopes import (LoadBalancingInstance, RoutingInstance, SchedulingInstance,
                        TreeInstance, _UnionFind)
from .problem import ProblemInstance

ENUMERATION_CAP = 10**6
DEGREE_CAP = 20
DEFAULT_SAMPLES = 10_000


class RoundingError(ValueError):
    pass


class OutcomeSpaceTooLarge(RoundingError):
    """Raised when exact enumeration would exceed the cap; use Monte Carlo instead."""


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Seeded tree of random streams: ``RngStream(7).child(3).generator()``."""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, key: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(key),))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(int(self.seed), spawn_key=self.path)))

    def uniform(self) -> float:
        return float(self.generator().random())


def _draw(probs: np.ndarray, u: float) -> int:
    """Index ``k`` with ``cdf[k-1] <= u < cdf[k]`` after normalization."""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


class LoadCost(float):
    """``sum_i load_i^q`` that also carries the ``l_q`` norm."""

    norm: float

    def __new__(cls, value: float, exponent: float):
        obj = super().__new__(cls, value)
        obj.norm = float(value) ** (1.0 / exponent) if value > 0 else 0.0
        return obj


@dataclass
class RoutingSolution:
    paths: list[tuple[int, ...]]
    cost: float
    seed: int | None = None
    kind: str = "routing"

    def to_vector(self, instance: RoutingInstance) -> np.ndarray:
        y = np.zeros(instance.dimension)
        for i, path in enumerate(self.paths):
            for k in path:
                y[instance.var(i, k)] = 1.0
        return y


@dataclass
class AssignmentSolution:
    assignment: list[int]
    cost: float
    seed: int | None = None
    kind: str = "loadbalance"

    @property
    def norm(self) -> float:
        return getattr(self.cost, "norm", float("nan"))

    def to_vector(self, instance: LoadBalancingInstance) -> np.ndarray:
        x = np.zeros(instance.dimension)
        for j, i in enumerate(self.assignment):
            x[instance.var(i, j)] = 1.0
        return x


@dataclass
class ScheduleSolution:
    """Per-machine job order with start and completion times."""

    machine: list[int]
    start: list[int]
    completion: list[int]
    order: list[list[int]]
    cost: float
    seed: int | None = None
    tentative: list[tuple[int, int]] = field(default_factory=list)
    kind: str = "schedule"

    def to_vector(self, instance: SchedulingInstance) -> np.ndarray:
        x = np.zeros(instance.dimension)
        for j, (i, s) in enumerate(zip(self.machine, self.start)):
            x[instance.var(i, j, s)] = 1.0
        return x


@dataclass
class TreeSolution:
    edges: tuple[int, ...]
    cost: float
    seed: int | None = None
    trace: list[float] = field(default_factory=list)
    kind: str = "tree"

    def to_vector(self, instance: TreeInstance) -> np.ndarray:
        x = np.zeros(instance.dimension)
        x[list(self.edges)] = 1.0
        return x


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


@dataclass
class PathDecomposition:
    """``paths[i]`` lists ``(edge ids, weight)`` with weights summing to ``d_i``."""

    paths: list[list[tuple[tuple[int, ...], float]]]


def _find_cycle(instance: RoutingInstance, flow: np.ndarray, tol: float) -> list[int] | None:
    out = [[] for _ in range(instance.num_vertices)]
    for k, e in enumerate(instance.edges):
        if flow[k] > tol:
            out[e.tail].append(k)
    color = [0] * instance.num_vertices
    via: dict[int, int] = {}
    for root in range(instance.num_vertices):
        if color[root]:
            continue
        stack = [(root, iter(out[root]))]
        color[root] = 1
        while stack:
            u, it = stack[-1]
            k = next(it, None)
            if k is None:
                color[u] = 2
                stack.pop()
                continue
            v = instance.edges[k].head
            if color[v] == 0:
                color[v] = 1
                via[v] = k
                stack.append((v, iter(out[v])))
            elif color[v] == 1:
                cycle = [k]
                w = u
                while w != v:
                    cycle.append(via[w])
                    w = instance.edges[via[w]].tail
                return cycle[::-1]
    return None


def strip_cycles(instance: RoutingInstance, flow, tol: float = 1e-12) -> np.ndarray:
    """Cancel flow around directed cycles; edge values only decrease."""
    flow = np.array(flow, dtype=float)
    while (cycle := _find_cycle(instance, flow, tol)) is not None:
        flow[cycle] -= min(flow[cycle])
    flow[flow <= tol] = 0.0
    return flow


def _check_conservation(instance: RoutingInstance, flow, demand: int, tol: float):
    d = instance.demands[demand]
    net = np.zeros(instance.num_vertices)
    for k, e in enumerate(instance.edges):
        net[e.tail] += flow[k]
        net[e.head] -= flow[k]
    want = np.zeros(instance.num_vertices)
    want[d.source], want[d.target] = 1.0, -1.0
    bad = np.abs(net - want)
    if np.max(bad) > tol:
        v = int(np.argmax(bad))
        raise RoundingError(f"demand {demand}: flow conservation violated at vertex {v} "
                            f"by {bad[v]:.3g}")


def decompose_flow(flow, instance: RoutingInstance, demand: int,
                   tol: float = 1e-9) -> list[tuple[tuple[int, ...], float]]:
    """Unit ``s -> t`` flow of one demand as paths weighted in demand units.

    Cycles are removed first; each path is then traced along the
    lowest-index edge still carrying flow.
    """
    flow = np.asarray(flow, dtype=float)
    _check_conservation(instance, flow, demand, tol)
    f = strip_cycles(instance, np.clip(flow, 0.0, None))
    d = instance.demands[demand]
    out = instance.out_edges()
    paths = []
    total = 0.0
    for _ in range(len(instance.edges) + 1):
        if 1.0 - total <= tol:
            break
        path, u = [], d.source
        while u != d.target:
            nxt = [k for k in out[u] if f[k] > tol]
            if not nxt:
                break
            path.append(nxt[0])
            u = instance.edges[nxt[0]].head
        if u != d.target or not path:
            break
        amount = float(min(f[path]))
        f[path] -= amount
        total += amount
        paths.append((tuple(path), amount))
    if abs(1.0 - total) > max(tol * len(instance.edges), 1e-7):
        raise RoundingError(f"demand {demand}: decomposition recovered {total:.9g} of 1")
    # exact weights in demand units, normalized against float drift
    return [(p, w / total * d.size) for p, w in paths]


def decompose_all(y, instance: RoutingInstance, tol: float = 1e-9) -> PathDecomposition:
    m = len(instance.edges)
    y = np.asarray(y, dtype=float)
    return PathDecomposition([decompose_flow(y[i * m:(i + 1) * m], instance, i, tol)
                              for i in range(len(instance.demands))])


def round_routing(y, instance: RoutingInstance, rng: RngStream,
                  decomposition: PathDecomposition | None = None) -> RoutingSolution:
    """One path per demand, chosen with probability ``lambda_p / d_i`` from its own substream."""
    dec = decomposition or decompose_all(y, instance)
    chosen = []
    for i, options in enumerate(dec.paths):
        probs = np.array([w for _, w in options])
        chosen.append(options[_draw(probs, rng.child(i).uniform())][0])
    cost = instance.cost_of_loads(instance.edge_loads(chosen))
    return RoutingSolution(chosen, cost, rng.seed)


# ---------------------------------------------------------------------------
# Load balancing
# ---------------------------------------------------------------------------


def _job_distributions(x, instance: LoadBalancingInstance, tol: float) -> np.ndarray:
    X = np.clip(np.asarray(x, dtype=float).reshape(instance.machines, instance.jobs), 0.0, None)
    sums = X.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RoundingError(f"job {int(bad[0])}: assignment column sums to {sums[bad[0]]:.9g}")
    for i in range(instance.machines):
        for j in range(instance.jobs):
            if instance.processing[i][j] is None and X[i, j] > tol:
                raise RoundingError(f"job {j} has mass on forbidden machine {i}")
            if instance.processing[i][j] is None:
                X[i, j] = 0.0
    return X / X.sum(axis=0)


def assignment_cost(instance: LoadBalancingInstance, assignment: Sequence[int]) -> LoadCost:
    q = float(instance.exponent)
    loads = instance.loads(assignment)
    return LoadCost(float(np.sum(loads ** q)), q)


def round_assignment(x, instance: LoadBalancingInstance, rng: RngStream,
                     tol: float = 1e-7) -> AssignmentSolution:
    """Each job independently picks machine ``i`` with probability ``x_ij``."""
    X = _job_distributions(x, instance, tol)
    assignment = [_draw(X[:, j], rng.child(j).uniform()) for j in range(instance.jobs)]
    return AssignmentSolution(assignment, assignment_cost(instance, assignment), rng.seed)


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------


def _start_distributions(x, instance: SchedulingInstance, tol: float = 1e-12):
    """Per job: list of ``((machine, start), probability)`` with positive mass."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    out = []
    for j in range(instance.jobs):
        opts = []
        for i in range(instance.machines):
            base = instance.var(i, j, 0)
            for t in np.flatnonzero(x[base:base + instance.horizon] > tol):
                opts.append(((i, int(t)), float(x[base + t])))
        total = sum(p for _, p in opts)
        if total <= 0:
            raise RoundingError(f"job {j} has no fractional start time to sample from")
        out.append([(o, p / total) for o, p in opts])
    return out


def sequence_tentative(instance: SchedulingInstance, tentative: Sequence[tuple[int, int]]):
    """Back-to-back schedule ordered by tentative completion, then job index."""
    machine = [i for i, _ in tentative]
    order = [[] for _ in range(instance.machines)]
    keys = sorted(range(instance.jobs),
                  key=lambda j: (tentative[j][1] + instance.processing[tentative[j][0]][j], j))
    for j in keys:
        order[machine[j]].append(j)
    start = [0] * instance.jobs
    completion = [0] * instance.jobs
    for i, jobs in enumerate(order):
        clock = 0
        for j in jobs:
            start[j] = clock
            clock += instance.processing[i][j]
            completion[j] = clock
    return machine, start, completion, order


def round_schedule(x, instance: SchedulingInstance, rng: RngStream) -> ScheduleSolution:
    """Sample a tentative ``(machine, start)`` per job, then sequence per machine."""
    dists = _start_distributions(x, instance)
    tentative = []
    for j, opts in enumerate(dists):
        probs = np.array([p for _, p in opts])
        tentative.append(opts[_draw(probs, rng.child(j).uniform())][0])
    machine, start, completion, order = sequence_tentative(instance, tentative)
    return ScheduleSolution(machine, start, completion, order,
                            instance.completion_cost(completion), rng.seed, tentative)


# ---------------------------------------------------------------------------
# Spanning tree: multilinear extension and pipage rounding
# ---------------------------------------------------------------------------


def _vertex_expectation(base: float, weights: np.ndarray, probs: np.ndarray, q: float) -> float:
    m = len(weights)
    if m == 0:
        return base ** q
    bits = ((np.arange(2 ** m)[:, None] >> np.arange(m)) & 1).astype(float)
    pr = np.prod(np.where(bits > 0, probs, 1.0 - probs), axis=1)
    loads = base + bits @ weights
    return float(pr @ np.power(loads, q))


def multilinear_F(x, instance: TreeInstance, mode: str = "exact",
                  samples: int = DEFAULT_SAMPLES, seed: int = 0,
                  degree_cap: int = DEGREE_CAP) -> float:
    """Expected tree objective when each edge is kept independently with probability ``x_e``.

    ``exact`` enumerates the fractional incident edges of each vertex;
    ``sample`` returns the Monte Carlo mean (see :func:`multilinear_F_sample`).
    """
    if mode == "sample":
        return multilinear_F_sample(x, instance, samples, seed)[0]
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=float)
    q = float(instance.exponent)
    total = 0.0
    for v in range(instance.num_vertices):
        inc = instance.incident(v)
        w = np.array([float(instance.edges[k][2]) for k in inc])
        p = x[inc]
        frac = (p > 0) & (p < 1)
        if frac.sum() > degree_cap:
            raise OutcomeSpaceTooLarge(f"vertex {v} has {int(frac.sum())} fractional edges "
                                       f"(cap {degree_cap}); use sample mode")
        base = float(w[p >= 1] @ np.ones(int((p >= 1).sum())))
        total += _vertex_expectation(base, w[frac], p[frac], q)
    return total


def multilinear_F_sample(x, instance: TreeInstance, samples: int = DEFAULT_SAMPLES,
                         seed: int = 0) -> tuple[float, float]:
    """``(mean, standard error)`` of the tree objective under independent edge draws."""
    x = np.asarray(x, dtype=float)
    gen = RngStream(seed).generator()
    draws = (gen.random((samples, len(x))) < x).astype(float)
    ends = np.array([(u, v) for u, v, _ in instance.edges], dtype=int).reshape(-1, 2)
    w = np.array([float(e[2]) for e in instance.edges])
    loads = np.zeros((samples, instance.num_vertices))
    for k, (u, v) in enumerate(ends):
        loads[:, u] += w[k] * draws[:, k]
        loads[:, v] += w[k] * draws[:, k]
    vals = np.sum(loads ** float(instance.exponent), axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def _tight_sets(polytope, x, tol):
    masks, A, b = polytope.subset_rows()
    slack = b - A @ x
    return masks, A, slack


def pipage_round(x, instance: TreeInstance, evaluator=None, tol: float = 1e-9,
                 max_steps: int | None = None) -> TreeSolution:
    """Round a point of the spanning tree polytope to a tree without increasing ``F``.

    Each step takes the smallest tight vertex set holding at least two
    fractional edges, shifts mass between its two lowest-index fractional
    edges as far as the polytope allows in either direction, and keeps the
    endpoint with the smaller ``F``.  ``trace`` records ``F`` after each step.
    """
    from .polytopes import matroid_base_polytope
    F = evaluator or (lambda z: multilinear_F(z, instance))
    poly = matroid_base_polytope(instance)
    x = np.array(x, dtype=float)
    if poly.separate(x, 1e-7) is not None:
        raise RoundingError("pipage rounding needs a point of the spanning tree polytope")
    x[np.abs(x) <= tol] = 0.0
    x[np.abs(x - 1.0) <= tol] = 1.0
    nv, m = instance.num_vertices, instance.dimension
    masks, A, _ = poly.subset_rows()
    full = (1 << nv) - 1
    # candidate sets by increasing size, the whole vertex set last
    order = sorted(range(len(masks)), key=lambda r: (bin(masks[r]).count("1"), masks[r]))
    rows = [A[r] for r in order] + [np.ones(m)]
    rhs = np.array([bin(masks[r]).count("1") - 1.0 for r in order] + [nv - 1.0])
    R = np.array(rows)
    trace = [F(x)]
    cap = max_steps if max_steps is not None else 4 * m * m + 10
    for _ in range(cap):
        frac = (x > 0) & (x < 1)
        if not frac.any():
            break
        slack = rhs - R @ x
        pair = None
        for r in range(len(rows)):
            if slack[r] > tol:
                continue
            inside = np.flatnonzero((R[r] > 0) & frac)
            if len(inside) >= 2:
                pair = (int(inside[0]), int(inside[1]))
                break
        if pair is None:
            raise RoundingError("internal invariant: no fractional pair in any tight set")
        a, b = pair
        direction = np.zeros(m)
        direction[a], direction[b] = 1.0, -1.0
        rate = R @ direction
        # box limits, then every subset row the move would tighten
        hi = min(1.0 - x[a], x[b])
        lo = -min(x[a], 1.0 - x[b])
        pos, neg = rate > 0, rate < 0
        if pos.any():
            hi = min(hi, float(np.min(np.maximum(slack[pos], 0.0) / rate[pos])))
        if neg.any():
            lo = max(lo, float(np.max(np.maximum(slack[neg], 0.0) / rate[neg])))
        if hi - lo <= tol:
            raise RoundingError("internal invariant: pipage step has zero length")
        cand = [x + lo * direction, x + hi * direction]
        for c in cand:
            c[np.abs(c) <= tol] = 0.0
            c[np.abs(c - 1.0) <= tol] = 1.0
        vals = [F(c) for c in cand]
        pick = 0 if vals[0] <= vals[1] else 1
        x = cand[pick]
        trace.append(vals[pick])
    else:
        raise RoundingError(f"pipage rounding did not finish within {cap} steps")
    edges = tuple(int(k) for k in np.flatnonzero(x > 0.5))
    uf = _UnionFind(nv)
    if len(edges) != nv - 1 or not all(uf.union(*instance.edges[k][:2]) for k in edges):
        raise RoundingError("internal invariant: pipage output is not a spanning tree")
    return TreeSolution(edges, instance.tree_cost(edges), None, trace)


# ---------------------------------------------------------------------------
# Cost recomputation
# ---------------------------------------------------------------------------


def evaluate_cost(solution, instance) -> float:
    """Objective of a rounded solution, recomputed from the combinatorial object."""
    if isinstance(instance, RoutingInstance):
        for i, (d, path) in enumerate(zip(instance.demands, solution.paths)):
            u = d.source
            for k in path:
                if instance.edges[k].tail != u:
                    raise RoundingError(f"demand {i}: path is not connected at edge {k}")
                u = instance.edges[k].head
            if u != d.target:
                raise RoundingError(f"demand {i}: path does not end at the target")
        if len(solution.paths) != len(instance.demands):
            raise RoundingError("need exactly one path per demand")
        return instance.cost_of_loads(instance.edge_loads(solution.paths))
    if isinstance(instance, LoadBalancingInstance):
        if len(solution.assignment) != instance.jobs:
            raise RoundingError("need exactly one machine per job")
        return assignment_cost(instance, solution.assignment)
    if isinstance(instance, SchedulingInstance):
        busy = {}
        for j, (i, s, c) in enumerate(zip(solution.machine, solution.start, solution.completion)):
            if c - s != instance.processing[i][j] or s < 0:
                raise RoundingError(f"job {j}: completion does not match its processing time")
            for a, b in busy.get(i, []):
                if s < b and a < c:
                    raise RoundingError(f"job {j} overlaps another job on machine {i}")
            busy.setdefault(i, []).append((s, c))
        return instance.completion_cost(solution.completion)
    if isinstance(instance, TreeInstance):
        uf = _UnionFind(instance.num_vertices)
        if len(solution.edges) != instance.num_vertices - 1 or \
                not all(uf.union(*instance.edges[k][:2]) for k in solution.edges):
            raise RoundingError("edge set is not a spanning tree")
        return instance.tree_cost(solution.edges)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


# ---------------------------------------------------------------------------
# Exact expectations
# ---------------------------------------------------------------------------


def _product_size(options) -> int:
    return math.prod(len(o) for o in options)


def enumerate_outcomes(frac, instance, cap: int = ENUMERATION_CAP) -> Iterator[tuple[float, object]]:
    """Every outcome of the independent draws as ``(probability, solution)``."""
    if isinstance(instance, RoutingInstance):
        dec = decompose_all(frac, instance)
        options = [[(p, w / d.size) for p, w in paths]
                   for paths, d in zip(dec.paths, instance.demands)]
        _check_cap(options, cap)
        for combo in itertools.product(*options):
            chosen = [p for p, _ in combo]
            prob = math.prod(w for _, w in combo)
            cost = instance.cost_of_loads(instance.edge_loads(chosen))
            yield prob, RoutingSolution(chosen, cost)
    elif isinstance(instance, LoadBalancingInstance):
        X = _job_distributions(frac, instance, 1e-7)
        options = [[(i, X[i, j]) for i in range(instance.machines) if X[i, j] > 0]
                   for j in range(instance.jobs)]
        _check_cap(options, cap)
        for combo in itertools.product(*options):
            assignment = [i for i, _ in combo]
            yield math.prod(p for _, p in combo), AssignmentSolution(
                assignment, assignment_cost(instance, assignment))
    elif isinstance(instance, SchedulingInstance):
        options = _start_distributions(frac, instance)
        _check_cap(options, cap)
        for combo in itertools.product(*options):
            tentative = [o for o, _ in combo]
            machine, start, completion, order = sequence_tentative(instance, tentative)
            yield math.prod(p for _, p in combo), ScheduleSolution(
                machine, start, completion, order, instance.completion_cost(completion),
                tentative=tentative)
    elif isinstance(instance, TreeInstance):
        sol = pipage_round(frac, instance)
        yield 1.0, sol
    else:
        raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _check_cap(options, cap):
    size = _product_size(options)
    if size > cap:
        raise OutcomeSpaceTooLarge(f"{size} outcomes exceed the cap of {cap}; "
                                   "estimate the expectation by Monte Carlo instead")


def expected_rounded_cost_exact(frac, instance, cap: int = ENUMERATION_CAP) -> float:
    """Exact expected cost of the matching rounding procedure by full enumeration.

    Pipage rounding is deterministic, so for trees this is the cost of its output.
    """
    return math.fsum(p * float(sol.cost) for p, sol in enumerate_outcomes(frac, instance, cap))


def exact_marginals(frac, instance, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``Pr(variable i = 1)`` under the rounding, by enumeration."""
    out = np.zeros(instance.dimension)
    for p, sol in enumerate_outcomes(frac, instance, cap):
        out += p * sol.to_vector(instance)
    return out


def expected_schedule_cost(x, instance: SchedulingInstance) -> float:
    """Exact expected scheduling cost without enumerating the product space.

    Conditioned on job ``j``'s tentative ``(i, t)``, its completion time is
    ``p_ij`` plus independent contributions ``p_ik`` from each other job ``k``
    that lands on ``i`` with an earlier sequencing key; their distribution is
    convolved exactly.
    """
    dists = _start_distributions(x, instance)
    p = float(instance.exponent)
    total = 0.0
    for j, opts in enumerate(dists):
        for (i, t), pr in opts:
            key_j = (t + instance.processing[i][j], j)
            dist = {instance.processing[i][j]: 1.0}
            for k, kopts in enumerate(dists):
                if k == j:
                    continue
                before = sum(q for (ik, tk), q in kopts
                             if ik == i and (tk + instance.processing[ik][k], k) < key_j)
                if before <= 0:
                    continue
                step = instance.processing[i][k]
                new: dict[int, float] = {}
                for c, q in dist.items():
                    new[c] = new.get(c, 0.0) + q * (1 - before)
                    new[c + step] = new.get(c + step, 0.0) + q * before
                dist = new
            total += float(instance.weights[j]) * pr * sum(q * c ** p for c, q in dist.items())
    return total


def expected_cost_independent(problem: ProblemInstance, y) -> float:
    """``sum_j E[f_j(sum_i d_ij X_i)]`` with independent ``X_i ~ Bernoulli(y_i)``.

    Routing and load balancing rounding make the indicators within one term
    independent, so this equals their expected cost.
    """
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    total = 0.0
    for term in problem.terms:
        probs = y[list(term.support)]
        dist = {0: 1.0}
        for w, pr in zip(term.weights, probs):
            if pr <= 0:
                continue
            new: dict[int, float] = {}
            for b, q in dist.items():
                new[b] = new.get(b, 0.0) + q * (1 - pr)
                new[b + w] = new.get(b + w, 0.0) + q * pr
            dist = new
        budgets = np.array(list(dist.keys()))
        weights = np.array(list(dist.values()))
        total += float(weights @ np.asarray(term.cost(budgets * float(term.delta)), dtype=float))
    if problem.linear is not None:
        total += float(problem.linear @ y)
    return total
