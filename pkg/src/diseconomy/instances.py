"""JSON instance documents and seeded random instance generators."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any

import numpy as np

from .polytopes import (Demand, Edge, InvalidInstance, LoadBalancingInstance, RoutingInstance,
                        SchedulingInstance, TreeInstance)
from .problem import to_fraction

KINDS = ("routing", "loadbalance", "schedule", "tree")

MAX_VERTICES = 16
MAX_JOBS = 12
MAX_MACHINES = 8


def _dec(x) -> str:
    """Exact decimal-or-ratio string for a rational."""
    f = to_fraction(x)
    if f.denominator == 1:
        return str(f.numerator)
    return str(f)


def _int(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise InvalidInstance(f"{what} must be an integer, got {x!r}")
    return x


def _frac(x, what: str) -> Fraction:
    try:
        return to_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidInstance(f"{what}: cannot parse {x!r} as a number") from exc


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def instance_to_json(inst) -> dict:
    if isinstance(inst, RoutingInstance):
        return {"kind": "routing", "vertices": inst.num_vertices,
                "edges": [{"id": e.id, "tail": e.tail, "head": e.head,
                           "scale": _dec(e.scale), "exponent": _dec(e.exponent)}
                          for e in inst.edges],
                "demands": [{"size": d.size, "source": d.source, "target": d.target}
                            for d in inst.demands]}
    if isinstance(inst, LoadBalancingInstance):
        return {"kind": "loadbalance", "exponent": _dec(inst.exponent),
                "processing": [[p for p in row] for row in inst.processing]}
    if isinstance(inst, TreeInstance):
        return {"kind": "tree", "vertices": inst.num_vertices, "exponent": _dec(inst.exponent),
                "edges": [{"u": u, "v": v, "weight": _dec(w)} for u, v, w in inst.edges]}
    if isinstance(inst, SchedulingInstance):
        doc = {"kind": "schedule", "exponent": _dec(inst.exponent),
               "weights": [_dec(w) for w in inst.weights],
               "processing": [list(row) for row in inst.processing]}
        if inst.horizon != sum(sum(r) for r in inst.processing):
            doc["horizon"] = inst.horizon
        return doc
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def instance_from_json(doc: dict[str, Any]):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InvalidInstance("instance document needs a top-level 'kind'")
    kind = doc["kind"]
    try:
        if kind == "routing":
            edges = [Edge(str(e["id"]), _int(e["tail"], "tail"), _int(e["head"], "head"),
                          _frac(e.get("scale", "1"), "scale"), _frac(e.get("exponent", "2"), "exponent"))
                     for e in doc["edges"]]
            demands = [Demand(_int(d["size"], "demand size"), _int(d["source"], "source"),
                              _int(d["target"], "target")) for d in doc["demands"]]
            return RoutingInstance(_int(doc["vertices"], "vertices"), edges, demands)
        if kind == "loadbalance":
            proc = [[None if p is None else _int(p, "processing time") for p in row]
                    for row in doc["processing"]]
            return LoadBalancingInstance(proc, _frac(doc.get("exponent", "2"), "exponent"))
        if kind == "tree":
            edges = [(_int(e["u"], "u"), _int(e["v"], "v"), _frac(e.get("weight", "1"), "weight"))
                     for e in doc["edges"]]
            return TreeInstance(_int(doc["vertices"], "vertices"), edges,
                                _frac(doc.get("exponent", "2"), "exponent"))
        if kind == "schedule":
            proc = [[_int(p, "processing time") for p in row] for row in doc["processing"]]
            return SchedulingInstance(proc, [_frac(w, "weight") for w in doc["weights"]],
                                      _frac(doc.get("exponent", "1"), "exponent"),
                                      doc.get("horizon"))
    except KeyError as exc:
        raise InvalidInstance(f"{kind} instance is missing field {exc.args[0]!r}") from exc
    raise InvalidInstance(f"unknown instance kind {kind!r}; expected one of {', '.join(KINDS)}")


def kind_of(inst) -> str:
    return instance_to_json(inst)["kind"]


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("ascii")).hexdigest()


def load_instance(path: str):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return instance_from_json(doc), doc


def dump_instance(inst) -> str:
    return json.dumps(instance_to_json(inst), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def parallel_gap(n: int, q=2) -> RoutingInstance:
    """Two vertices joined by ``n`` parallel unit-cost edges and one unit demand."""
    if n < 1:
        raise InvalidInstance("need n >= 1 parallel edges")
    q = to_fraction(q)
    return RoutingInstance(2, [Edge(f"e{k}", 0, 1, Fraction(1), q) for k in range(n)],
                           [Demand(1, 0, 1)])


def _reachable(adj, s):
    seen, stack = {s}, [s]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def random_routing(rng: np.random.Generator, vertices: int = 6, demands: int = 2,
                   max_size: int = 3, q=2, extra_edges: int | None = None,
                   max_scale: int = 3) -> RoutingInstance:
    """Random digraph: a shuffled Hamiltonian path plus random extra (possibly parallel) edges."""
    if not 2 <= vertices <= MAX_VERTICES:
        raise InvalidInstance(f"vertices must lie in [2, {MAX_VERTICES}]")
    order = rng.permutation(vertices)
    pairs = [(int(order[k]), int(order[k + 1])) for k in range(vertices - 1)]
    extra = vertices if extra_edges is None else extra_edges
    for _ in range(extra):
        u, v = rng.choice(vertices, 2, replace=False)
        pairs.append((int(u), int(v)))
    q = to_fraction(q)
    edges = [Edge(f"e{k}", u, v, Fraction(int(rng.integers(1, max_scale + 1))), q)
             for k, (u, v) in enumerate(pairs)]
    adj = [[] for _ in range(vertices)]
    for u, v in pairs:
        adj[u].append(v)
    candidates = [(s, t) for s in range(vertices) for t in sorted(_reachable(adj, s)) if t != s]
    picks = rng.choice(len(candidates), size=demands, replace=True)
    dem = [Demand(int(rng.integers(1, max_size + 1)), *candidates[int(k)]) for k in picks]
    return RoutingInstance(vertices, edges, dem)


def random_loadbalance(rng: np.random.Generator, machines: int = 2, jobs: int = 3,
                       max_time: int = 4, q=2, forbid: float = 0.0) -> LoadBalancingInstance:
    if not (1 <= machines <= MAX_MACHINES and 1 <= jobs <= MAX_JOBS):
        raise InvalidInstance("load balancing size beyond desk caps")
    proc = rng.integers(1, max_time + 1, size=(machines, jobs)).tolist()
    if forbid > 0:
        for j in range(jobs):
            keep = int(rng.integers(machines))
            for i in range(machines):
                if i != keep and rng.random() < forbid:
                    proc[i][j] = None
    return LoadBalancingInstance(proc, to_fraction(q))


def random_tree(rng: np.random.Generator, vertices: int = 5, extra_edges: int = 3,
                max_weight: int = 3, q=2) -> TreeInstance:
    """Random spanning tree plus extra edges, integer weights."""
    if not 2 <= vertices <= MAX_VERTICES:
        raise InvalidInstance(f"vertices must lie in [2, {MAX_VERTICES}]")
    order = rng.permutation(vertices)
    edges = []
    for k in range(1, vertices):
        parent = int(order[int(rng.integers(k))])
        edges.append((parent, int(order[k])))
    for _ in range(extra_edges):
        u, v = rng.choice(vertices, 2, replace=False)
        edges.append((int(u), int(v)))
    return TreeInstance(vertices, [(u, v, Fraction(int(rng.integers(1, max_weight + 1))))
                                   for u, v in edges], to_fraction(q))


def random_schedule(rng: np.random.Generator, machines: int = 2, jobs: int = 3,
                    max_time: int = 3, p=1, max_weight: int = 3) -> SchedulingInstance:
    if not (1 <= machines <= MAX_MACHINES and 1 <= jobs <= MAX_JOBS):
        raise InvalidInstance("scheduling size beyond desk caps")
    proc = rng.integers(1, max_time + 1, size=(machines, jobs)).tolist()
    weights = [Fraction(int(w)) for w in rng.integers(1, max_weight + 1, size=jobs)]
    return SchedulingInstance(proc, weights, to_fraction(p))


def generate(kind: str, seed: int, **params):
    """Deterministic random instance of ``kind`` for ``seed``; ``params`` go to the generator."""
    rng = np.random.default_rng(seed)
    makers = {"routing": random_routing, "loadbalance": random_loadbalance,
              "tree": random_tree, "schedule": random_schedule}
    if kind not in makers:
        raise InvalidInstance(f"unknown instance kind {kind!r}")
    return makers[kind](rng, **{k: v for k, v in params.items() if v is not None})
