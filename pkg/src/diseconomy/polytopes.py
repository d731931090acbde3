"""Application instances and their polytope oracles.

Every oracle exposes the same surface: ``dimension``, ``upper_bounds``,
``linear_minimize(cost)``, ``separate(y, tol)``, ``list_vertices()`` for small
instances, and the linear constraints used by the master LP
(``explicit_constraints()``, plus ``full_constraints()`` which also lists
families that are otherwise separated lazily).

New polytopes plug in by subclassing :class:`PolytopeOracle`.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .moments import PowerCost
from .problem import ProblemInstance, TermData, to_fraction


class InfeasiblePolytope(ValueError):
    """Raised when an instance's polytope is empty."""


class UnboundedDirection(ValueError):
    """Raised when a linear objective cannot be minimized by the combinatorial oracle."""


class InvalidInstance(ValueError):
    pass


class Cut(NamedTuple):
    """A violated constraint ``coeffs . y (sense) rhs``."""

    coeffs: np.ndarray
    rhs: float
    sense: str
    violation: float
    label: str


@dataclass
class LinearConstraints:
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    eq_labels: list[str] = field(default_factory=list)
    ub_labels: list[str] = field(default_factory=list)


def _violations(A, b, y, sense):
    lhs = A @ y
    return np.abs(lhs - b) if sense == "==" else lhs - b


class PolytopeOracle:
    """Linear optimization and separation over a polytope inside ``[0, 1]^n``."""

    dimension: int
    upper_bounds: np.ndarray

    def linear_minimize(self, cost) -> np.ndarray:
        raise NotImplementedError

    def explicit_constraints(self) -> LinearConstraints:
        raise NotImplementedError

    def full_constraints(self) -> LinearConstraints:
        return self.explicit_constraints()

    def list_vertices(self) -> Iterator[np.ndarray]:
        raise NotImplementedError

    def _box_cut(self, y, tol) -> Cut | None:
        low = -y
        high = y - self.upper_bounds
        i, j = int(np.argmax(low)), int(np.argmax(high))
        if max(low[i], high[j]) <= tol:
            return None
        coeffs = np.zeros(self.dimension)
        if low[i] >= high[j]:
            coeffs[i] = -1.0
            return Cut(coeffs, 0.0, "<=", float(low[i]), f"lower bound y[{i}] >= 0")
        coeffs[j] = 1.0
        return Cut(coeffs, float(self.upper_bounds[j]), "<=", float(high[j]),
                   f"upper bound y[{j}] <= {self.upper_bounds[j]:g}")

    def _row_cut(self, cons: LinearConstraints, y, tol) -> Cut | None:
        """Most violated row; equality and inequality rows are scanned in one list."""
        best = None
        for A, b, sense, labels in ((cons.A_ub, cons.b_ub, "<=", cons.ub_labels),
                                    (cons.A_eq, cons.b_eq, "==", cons.eq_labels)):
            if A.shape[0] == 0:
                continue
            viol = _violations(A, b, y, sense)
            k = int(np.argmax(viol))
            if viol[k] > tol and (best is None or viol[k] > best.violation):
                label = labels[k] if labels else f"row {k}"
                best = Cut(A[k].astype(float), float(b[k]), sense, float(viol[k]), label)
        return best

    def separate(self, y, tol: float = 1e-9) -> Cut | None:
        """``None`` when ``y`` is inside (within ``tol``), else a violated constraint."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dimension,):
            raise ValueError(f"expected a point of dimension {self.dimension}")
        return self._box_cut(y, tol) or self._row_cut(self.full_constraints(), y, tol)

    def contains(self, y, tol: float = 1e-9) -> bool:
        return self.separate(y, tol) is None


# ---------------------------------------------------------------------------
# Energy efficient routing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    id: str
    tail: int
    head: int
    scale: Fraction = Fraction(1)
    exponent: Fraction = Fraction(2)


@dataclass(frozen=True)
class Demand:
    size: int
    source: int
    target: int


@dataclass
class RoutingInstance:
    """Directed multigraph with per-edge costs ``c_e x^{q_e}`` and unsplittable demands."""

    num_vertices: int
    edges: list[Edge]
    demands: list[Demand]

    def __post_init__(self):
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise InvalidInstance("edge ids must be unique")
        for e in self.edges:
            if not (0 <= e.tail < self.num_vertices and 0 <= e.head < self.num_vertices):
                raise InvalidInstance(f"edge {e.id} has an endpoint outside the vertex set")
            if e.scale < 0 or e.exponent < 1:
                raise InvalidInstance(f"edge {e.id} needs scale >= 0 and exponent >= 1")
        for k, d in enumerate(self.demands):
            if d.size < 1 or int(d.size) != d.size:
                raise InvalidInstance(f"demand {k} must have a positive integer size")
            if d.source == d.target:
                raise InvalidInstance(f"demand {k} has source == target")
            if d.target not in self._reachable(d.source):
                raise InvalidInstance(f"demand {k}: target not reachable from source")

    def _reachable(self, s: int) -> set[int]:
        out = self.out_edges()
        seen, stack = {s}, [s]
        while stack:
            u = stack.pop()
            for k in out[u]:
                v = self.edges[k].head
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def out_edges(self) -> list[list[int]]:
        out = [[] for _ in range(self.num_vertices)]
        for k, e in enumerate(self.edges):
            out[e.tail].append(k)
        return out

    def in_edges(self) -> list[list[int]]:
        inc = [[] for _ in range(self.num_vertices)]
        for k, e in enumerate(self.edges):
            inc[e.head].append(k)
        return inc

    def var(self, demand: int, edge: int) -> int:
        return demand * len(self.edges) + edge

    @property
    def dimension(self) -> int:
        return len(self.demands) * len(self.edges)

    def edge_loads(self, paths: Sequence[Sequence[int]]) -> np.ndarray:
        loads = np.zeros(len(self.edges))
        for d, path in zip(self.demands, paths):
            for k in path:
                loads[k] += d.size
        return loads

    def cost_of_loads(self, loads) -> float:
        return sum(float(e.scale) * float(x) ** float(e.exponent)
                   for e, x in zip(self.edges, loads) if x > 0)

    def max_exponent(self) -> float:
        return max((float(e.exponent) for e in self.edges), default=1.0)

    def to_problem(self) -> ProblemInstance:
        terms = []
        for k, e in enumerate(self.edges):
            coeffs = {self.var(i, k): d.size for i, d in enumerate(self.demands)}
            if coeffs:
                terms.append(TermData.build(k, coeffs, PowerCost(float(e.scale), float(e.exponent))))
        return ProblemInstance(terms, flow_polytope(self), kind="routing", source=self)


class FlowPolytope(PolytopeOracle):
    """Product over demands of unit ``s_i -> t_i`` flow polytopes.

    Besides conservation, ``out(s) = in(t) = 1`` and the box, the rows
    ``in(s) = 0`` and ``out(t) = 0`` are included so every point decomposes
    into ``s -> t`` paths plus circulations.
    """

    def __init__(self, instance: RoutingInstance):
        self.instance = instance
        self.dimension = instance.dimension
        self.upper_bounds = np.ones(self.dimension)
        self._cons = self._build()

    def _build(self) -> LinearConstraints:
        inst = self.instance
        out, inc = inst.out_edges(), inst.in_edges()
        rows, rhs, labels = [], [], []

        def row(entries, b, label):
            r = np.zeros(self.dimension)
            for idx, val in entries:
                r[idx] += val
            rows.append(r)
            rhs.append(b)
            labels.append(label)

        for i, d in enumerate(inst.demands):
            s, t = d.source, d.target
            row([(inst.var(i, k), 1.0) for k in out[s]], 1.0, f"demand {i}: outflow of source = 1")
            row([(inst.var(i, k), 1.0) for k in inc[t]], 1.0, f"demand {i}: inflow of target = 1")
            if inc[s]:
                row([(inst.var(i, k), 1.0) for k in inc[s]], 0.0, f"demand {i}: inflow of source = 0")
            if out[t]:
                row([(inst.var(i, k), 1.0) for k in out[t]], 0.0, f"demand {i}: outflow of target = 0")
            for u in range(inst.num_vertices):
                if u in (s, t):
                    continue
                entries = [(inst.var(i, k), 1.0) for k in out[u]]
                entries += [(inst.var(i, k), -1.0) for k in inc[u]]
                if entries:
                    row(entries, 0.0, f"demand {i}: conservation at vertex {u}")
        A = np.array(rows) if rows else np.zeros((0, self.dimension))
        return LinearConstraints(A, np.array(rhs), np.zeros((0, self.dimension)), np.zeros(0),
                                 eq_labels=labels)

    def explicit_constraints(self) -> LinearConstraints:
        return self._cons

    def shortest_path(self, demand: int, edge_cost: np.ndarray) -> list[int]:
        """Dijkstra over edge ids; ties resolved by smallest edge index."""
        inst = self.instance
        d = inst.demands[demand]
        out = inst.out_edges()
        dist = {d.source: 0.0}
        pred: dict[int, int] = {}
        heap = [(0.0, d.source)]
        done = set()
        while heap:
            du, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == d.target:
                break
            for k in out[u]:
                v = inst.edges[k].head
                if v == d.source:
                    continue
                nd = du + edge_cost[k]
                if v not in dist or nd < dist[v] - 1e-15:
                    dist[v] = nd
                    pred[v] = k
                    heapq.heappush(heap, (nd, v))
        path, v = [], d.target
        while v != d.source:
            k = pred[v]
            path.append(k)
            v = inst.edges[k].tail
        return path[::-1]

    def linear_minimize(self, cost) -> np.ndarray:
        cost = np.asarray(cost, dtype=float)
        if np.any(cost < 0):
            raise UnboundedDirection("negative edge costs are not supported by the path oracle")
        inst = self.instance
        m = len(inst.edges)
        y = np.zeros(self.dimension)
        for i in range(len(inst.demands)):
            for k in self.shortest_path(i, cost[i * m:(i + 1) * m]):
                y[inst.var(i, k)] = 1.0
        return y

    def simple_paths(self, demand: int) -> list[list[int]]:
        """All simple ``s -> t`` paths as edge-index lists (parallel edges kept distinct)."""
        inst = self.instance
        d = inst.demands[demand]
        out = inst.out_edges()
        paths = []

        def dfs(u, visited, path):
            if u == d.target:
                paths.append(list(path))
                return
            for k in out[u]:
                v = inst.edges[k].head
                if v not in visited:
                    visited.add(v)
                    path.append(k)
                    dfs(v, visited, path)
                    path.pop()
                    visited.discard(v)

        dfs(d.source, {d.source}, [])
        return paths

    def list_vertices(self) -> Iterator[np.ndarray]:
        inst = self.instance
        per_demand = [self.simple_paths(i) for i in range(len(inst.demands))]
        for combo in itertools.product(*per_demand):
            y = np.zeros(self.dimension)
            for i, path in enumerate(combo):
                for k in path:
                    y[inst.var(i, k)] = 1.0
            yield y


def flow_polytope(instance: RoutingInstance) -> FlowPolytope:
    return FlowPolytope(instance)


# ---------------------------------------------------------------------------
# Load balancing on unrelated machines
# ---------------------------------------------------------------------------


@dataclass
class LoadBalancingInstance:
    """``processing[i][j]`` is the time of job ``j`` on machine ``i``; ``None`` forbids the pair."""

    processing: list[list[int | None]]
    exponent: Fraction = Fraction(2)

    def __post_init__(self):
        if not self.processing or not self.processing[0]:
            raise InvalidInstance("need at least one machine and one job")
        n = len(self.processing[0])
        if any(len(row) != n for row in self.processing):
            raise InvalidInstance("processing matrix is ragged")
        if self.exponent < 1:
            raise InvalidInstance("norm exponent must be >= 1")
        for j in range(n):
            col = [row[j] for row in self.processing]
            if all(p is None for p in col):
                raise InvalidInstance(f"job {j} has no allowed machine")
            if any(p is not None and p < 0 for p in col):
                raise InvalidInstance("processing times must be nonnegative")

    @property
    def machines(self) -> int:
        return len(self.processing)

    @property
    def jobs(self) -> int:
        return len(self.processing[0])

    def var(self, machine: int, job: int) -> int:
        return machine * self.jobs + job

    @property
    def dimension(self) -> int:
        return self.machines * self.jobs

    def loads(self, assignment: Sequence[int]) -> np.ndarray:
        loads = np.zeros(self.machines)
        for j, i in enumerate(assignment):
            p = self.processing[i][j]
            if p is None:
                raise InvalidInstance(f"job {j} may not run on machine {i}")
            loads[i] += float(p)
        return loads

    def to_problem(self) -> ProblemInstance:
        q = float(self.exponent)
        terms = []
        for i, row in enumerate(self.processing):
            coeffs = {self.var(i, j): p for j, p in enumerate(row) if p is not None}
            terms.append(TermData.build(i, coeffs, PowerCost(1.0, q)))
        return ProblemInstance(terms, assignment_polytope(self), kind="loadbalance", source=self)


class AssignmentPolytope(PolytopeOracle):
    """``sum_i x_ij = 1`` for every job, ``0 <= x <= 1`` (forbidden pairs fixed to 0)."""

    def __init__(self, instance: LoadBalancingInstance):
        self.instance = instance
        self.dimension = instance.dimension
        self.upper_bounds = np.array([0.0 if instance.processing[i][j] is None else 1.0
                                      for i in range(instance.machines)
                                      for j in range(instance.jobs)])
        A = np.zeros((instance.jobs, self.dimension))
        for j in range(instance.jobs):
            for i in range(instance.machines):
                A[j, instance.var(i, j)] = 1.0
        self._cons = LinearConstraints(A, np.ones(instance.jobs), np.zeros((0, self.dimension)),
                                       np.zeros(0), eq_labels=[f"job {j} assigned once"
                                                               for j in range(instance.jobs)])

    def explicit_constraints(self) -> LinearConstraints:
        return self._cons

    def linear_minimize(self, cost) -> np.ndarray:
        inst = self.instance
        cost = np.asarray(cost, dtype=float).reshape(inst.machines, inst.jobs)
        cost = np.where(self.upper_bounds.reshape(cost.shape) > 0, cost, np.inf)
        x = np.zeros(self.dimension)
        for j, i in enumerate(np.argmin(cost, axis=0)):
            x[inst.var(int(i), j)] = 1.0
        return x

    def list_vertices(self) -> Iterator[np.ndarray]:
        inst = self.instance
        choices = [[i for i in range(inst.machines) if inst.processing[i][j] is not None]
                   for j in range(inst.jobs)]
        for assignment in itertools.product(*choices):
            x = np.zeros(self.dimension)
            for j, i in enumerate(assignment):
                x[inst.var(i, j)] = 1.0
            yield x


def assignment_polytope(instance: LoadBalancingInstance) -> AssignmentPolytope:
    return AssignmentPolytope(instance)


# ---------------------------------------------------------------------------
# Degree balanced spanning tree
# ---------------------------------------------------------------------------


@dataclass
class TreeInstance:
    """Undirected multigraph; edges are ``(u, v, weight)``."""

    num_vertices: int
    edges: list[tuple[int, int, Fraction]]
    exponent: Fraction = Fraction(2)

    def __post_init__(self):
        self.edges = [(int(u), int(v), to_fraction(w)) for u, v, w in self.edges]
        for u, v, w in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices) or u == v:
                raise InvalidInstance(f"bad edge ({u}, {v})")
            if w < 0:
                raise InvalidInstance("edge weights must be nonnegative")
        if self.exponent < 1:
            raise InvalidInstance("exponent must be >= 1")
        if not self.is_connected():
            raise InfeasiblePolytope("graph is disconnected; no spanning tree exists")

    def is_connected(self) -> bool:
        if self.num_vertices == 0:
            return False
        parent = list(range(self.num_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        comps = self.num_vertices
        for u, v, _ in self.edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
                comps -= 1
        return comps == 1

    @property
    def dimension(self) -> int:
        return len(self.edges)

    def incident(self, v: int) -> list[int]:
        return [k for k, (a, b, _) in enumerate(self.edges) if v in (a, b)]

    def vertex_loads(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        loads = np.zeros(self.num_vertices)
        for k, (u, v, w) in enumerate(self.edges):
            loads[u] += float(w) * x[k]
            loads[v] += float(w) * x[k]
        return loads

    def tree_cost(self, edge_set) -> float:
        x = np.zeros(len(self.edges))
        x[list(edge_set)] = 1.0
        q = float(self.exponent)
        return float(np.sum(self.vertex_loads(x) ** q))

    def to_problem(self) -> ProblemInstance:
        q = float(self.exponent)
        terms = []
        for v in range(self.num_vertices):
            coeffs = {k: self.edges[k][2] for k in self.incident(v)}
            terms.append(TermData.build(v, coeffs, PowerCost(1.0, q)))
        return ProblemInstance(terms, matroid_base_polytope(self), kind="tree", source=self)


MAX_SUBSET_VERTICES = 16


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


class MatroidBasePolytope(PolytopeOracle):
    """Spanning tree polytope: ``x(E) = |V| - 1`` and ``x(E(S)) <= |S| - 1``.

    Subset rows are enumerated over connected vertex subsets, which limits
    separation to ``|V| <= 16``.
    """

    def __init__(self, instance: TreeInstance):
        self.instance = instance
        self.dimension = instance.dimension
        self.upper_bounds = np.ones(self.dimension)
        A = np.ones((1, self.dimension))
        self._cons = LinearConstraints(A, np.array([instance.num_vertices - 1.0]),
                                       np.zeros((0, self.dimension)), np.zeros(0),
                                       eq_labels=["sum of x_e = |V| - 1"])
        self._subsets = None

    def explicit_constraints(self) -> LinearConstraints:
        return self._cons

    def subset_rows(self) -> tuple[list[int], np.ndarray, np.ndarray]:
        """``(masks, A, b)`` for every connected proper vertex subset with ``|S| >= 2``."""
        if self._subsets is None:
            nv = self.instance.num_vertices
            if nv > MAX_SUBSET_VERTICES:
                raise NotImplementedError(
                    f"subset enumeration is limited to {MAX_SUBSET_VERTICES} vertices")
            ends = np.array([(u, v) for u, v, _ in self.instance.edges], dtype=int).reshape(-1, 2)
            adj = [0] * nv
            for u, v in ends:
                adj[u] |= 1 << int(v)
                adj[v] |= 1 << int(u)
            masks, rows, rhs = [], [], []
            for mask in range(1, (1 << nv) - 1):
                size = bin(mask).count("1")
                if size < 2 or not _connected_mask(mask, adj):
                    continue
                inside = np.array([(mask >> int(u)) & 1 and (mask >> int(v)) & 1
                                   for u, v in ends], dtype=float)
                masks.append(mask)
                rows.append(inside)
                rhs.append(size - 1.0)
            A = np.array(rows).reshape(len(rows), self.dimension)
            self._subsets = (masks, A, np.array(rhs))
        return self._subsets

    def full_constraints(self) -> LinearConstraints:
        masks, A, b = self.subset_rows()
        labels = [f"x(E(S)) <= |S| - 1 for S = {_mask_vertices(m)}" for m in masks]
        return LinearConstraints(self._cons.A_eq, self._cons.b_eq, A, b,
                                 self._cons.eq_labels, labels)

    def linear_minimize(self, cost) -> np.ndarray:
        """Kruskal; ties broken by edge index."""
        cost = np.asarray(cost, dtype=float)
        uf = _UnionFind(self.instance.num_vertices)
        x = np.zeros(self.dimension)
        for k in sorted(range(self.dimension), key=lambda k: (cost[k], k)):
            u, v, _ = self.instance.edges[k]
            if uf.union(u, v):
                x[k] = 1.0
        return x

    def list_vertices(self) -> Iterator[np.ndarray]:
        nv = self.instance.num_vertices
        for combo in itertools.combinations(range(self.dimension), nv - 1):
            uf = _UnionFind(nv)
            if all(uf.union(*self.instance.edges[k][:2]) for k in combo):
                x = np.zeros(self.dimension)
                x[list(combo)] = 1.0
                yield x


def _connected_mask(mask: int, adj: list[int]) -> bool:
    start = mask & -mask
    seen = start
    frontier = start
    while frontier:
        v = (frontier & -frontier).bit_length() - 1
        frontier &= frontier - 1
        new = adj[v] & mask & ~seen
        seen |= new
        frontier |= new
    return seen == mask


def _mask_vertices(mask: int) -> list[int]:
    return [v for v in range(mask.bit_length()) if (mask >> v) & 1]


def matroid_base_polytope(instance: TreeInstance) -> MatroidBasePolytope:
    if not instance.is_connected():
        raise InfeasiblePolytope("graph is disconnected; the base polytope is empty")
    return MatroidBasePolytope(instance)


# ---------------------------------------------------------------------------
# Scheduling with nonlinear functions of completion times
# ---------------------------------------------------------------------------


@dataclass
class SchedulingInstance:
    """``R || sum_j w_j C_j^p`` with integral ``processing[i][j] >= 1``.

    The horizon defaults to ``sum_{i,j} p_ij``.
    """

    processing: list[list[int]]
    weights: list[Fraction]
    exponent: Fraction = Fraction(1)
    horizon: int | None = None

    def __post_init__(self):
        if not self.processing or not self.processing[0]:
            raise InvalidInstance("need at least one machine and one job")
        n = len(self.processing[0])
        if any(len(row) != n for row in self.processing):
            raise InvalidInstance("processing matrix is ragged")
        for row in self.processing:
            for p in row:
                if int(p) != p or p < 1:
                    raise InvalidInstance("processing times must be integers >= 1")
        self.processing = [[int(p) for p in row] for row in self.processing]
        self.weights = [to_fraction(w) for w in self.weights]
        if len(self.weights) != n or any(w < 0 for w in self.weights):
            raise InvalidInstance("need one nonnegative weight per job")
        if self.exponent < 1:
            raise InvalidInstance("exponent must be >= 1")
        if self.horizon is None:
            self.horizon = sum(sum(row) for row in self.processing)

    @property
    def machines(self) -> int:
        return len(self.processing)

    @property
    def jobs(self) -> int:
        return len(self.processing[0])

    def var(self, machine: int, job: int, start: int) -> int:
        return (machine * self.jobs + job) * self.horizon + start

    def unvar(self, k: int) -> tuple[int, int, int]:
        mj, t = divmod(k, self.horizon)
        i, j = divmod(mj, self.jobs)
        return i, j, t

    @property
    def dimension(self) -> int:
        return self.machines * self.jobs * self.horizon

    def completion_cost(self, completions: Sequence[float]) -> float:
        p = float(self.exponent)
        return sum(float(w) * float(c) ** p for w, c in zip(self.weights, completions))

    def linear_costs(self) -> np.ndarray:
        """``w_j (t + p_ij)^p`` for every ``(i, j, t)``."""
        p = float(self.exponent)
        c = np.zeros(self.dimension)
        for i in range(self.machines):
            for j in range(self.jobs):
                t = np.arange(self.horizon)
                base = self.var(i, j, 0)
                c[base:base + self.horizon] = float(self.weights[j]) * (t + self.processing[i][j]) ** p
        return c

    def to_problem(self) -> ProblemInstance:
        return ProblemInstance([], time_indexed_polytope(self), linear=self.linear_costs(),
                               kind="schedule", source=self)


class TimeIndexedPolytope(PolytopeOracle):
    """Strong time-indexed formulation over ``x_{ijt}``, ``t`` in ``[0, T)``.

    Machine-time rows ``sum_j sum_{tau in (t - p_ij, t]} x_{ij tau} <= 1``
    cover every ``t`` at which some job may still be running. The polytope
    is not integral in general, so ``linear_minimize`` solves the LP.
    """

    def __init__(self, instance: SchedulingInstance):
        self.instance = instance
        self.dimension = instance.dimension
        self.upper_bounds = np.ones(self.dimension)
        self._cons = self._build()

    def _build(self) -> LinearConstraints:
        inst = self.instance
        T = inst.horizon
        pmax = max(max(row) for row in inst.processing)
        ub_rows, ub_labels = [], []
        for i in range(inst.machines):
            for t in range(T + pmax - 1):
                r = np.zeros(self.dimension)
                for j in range(inst.jobs):
                    p = inst.processing[i][j]
                    for tau in range(max(0, t - p + 1), min(t, T - 1) + 1):
                        r[inst.var(i, j, tau)] = 1.0
                if r.any():
                    ub_rows.append(r)
                    ub_labels.append(f"machine {i} busy at most once at time {t}")
        eq = np.zeros((inst.jobs, self.dimension))
        for j in range(inst.jobs):
            for i in range(inst.machines):
                base = inst.var(i, j, 0)
                eq[j, base:base + T] = 1.0
        A_ub = np.array(ub_rows).reshape(len(ub_rows), self.dimension)
        return LinearConstraints(eq, np.ones(inst.jobs), A_ub, np.ones(len(ub_rows)),
                                 [f"job {j} starts exactly once" for j in range(inst.jobs)],
                                 ub_labels)

    def explicit_constraints(self) -> LinearConstraints:
        return self._cons

    def linear_minimize(self, cost) -> np.ndarray:
        from .lp import restricted_lp_solve
        c = self._cons
        sol = restricted_lp_solve(np.asarray(cost, dtype=float), c.A_ub, c.b_ub, c.A_eq, c.b_eq,
                                  bounds=(0, 1))
        if not sol.optimal:
            raise InfeasiblePolytope(f"time-indexed LP is {sol.status}")
        return sol.x

    def list_vertices(self) -> Iterator[np.ndarray]:
        """Integral points: non-overlapping ``(machine, start)`` choices per job."""
        inst = self.instance
        options = [(i, t) for i in range(inst.machines) for t in range(inst.horizon)]
        for combo in itertools.product(options, repeat=inst.jobs):
            busy: dict[int, list[tuple[int, int]]] = {}
            ok = True
            for j, (i, t) in enumerate(combo):
                iv = (t, t + inst.processing[i][j])
                for a, b in busy.get(i, []):
                    if iv[0] < b and a < iv[1]:
                        ok = False
                        break
                if not ok:
                    break
                busy.setdefault(i, []).append(iv)
            if ok:
                x = np.zeros(self.dimension)
                for j, (i, t) in enumerate(combo):
                    x[inst.var(i, j, t)] = 1.0
                yield x


def time_indexed_polytope(instance: SchedulingInstance) -> TimeIndexedPolytope:
    return TimeIndexedPolytope(instance)
