"""Command line front end.

Reports are JSON on stdout and a short human table on stderr.  Exit codes:
0 success, 2 invalid input or flags, 3 a theoretical bound was violated.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cxlab, instances, oracles, relaxation, rounding
from .moments import DomainError, TabulatedConcave, concave_gain, fractional_bell
from .polytopes import (InfeasiblePolytope, InvalidInstance, LoadBalancingInstance,
                        RoutingInstance, SchedulingInstance, TreeInstance)

EXIT_OK, EXIT_INVALID, EXIT_BOUND = 0, 2, 3
ENUM_CAP_ENV = "DISECONOMY_ENUM_CAP"
BOUND_TOL = 1e-7


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Pipeline helpers
# ---------------------------------------------------------------------------


def enumeration_cap() -> int:
    raw = os.environ.get(ENUM_CAP_ENV)
    return int(raw) if raw else rounding.ENUMERATION_CAP


def theoretical_bound(inst) -> dict:
    """Guaranteed ratio of expected rounded cost to LP value for the instance's kind."""
    if isinstance(inst, RoutingInstance):
        q = inst.max_exponent()
        return {"name": "A_q", "q": q, "value": fractional_bell(q)}
    if isinstance(inst, (LoadBalancingInstance, TreeInstance)):
        q = float(inst.exponent)
        out = {"name": "A_q", "q": q, "value": fractional_bell(q)}
        if isinstance(inst, LoadBalancingInstance):
            out["norm_value"] = fractional_bell(q) ** (1 / q)
        return out
    if isinstance(inst, SchedulingInstance):
        p = float(inst.exponent)
        return {"name": "2^p A_p", "q": p, "value": 2 ** p * fractional_bell(p)}
    raise TypeError(type(inst).__name__)


def round_once(inst, y, stream: rounding.RngStream):
    if isinstance(inst, RoutingInstance):
        return rounding.round_routing(y, inst, stream)
    if isinstance(inst, LoadBalancingInstance):
        return rounding.round_assignment(y, inst, stream)
    if isinstance(inst, SchedulingInstance):
        return rounding.round_schedule(y, inst, stream)
    sol = rounding.pipage_round(y, inst)
    sol.seed = stream.seed
    return sol


def run_trials(inst, y, seed: int, trials: int, jobs: int = 1) -> list[float]:
    base = rounding.RngStream(seed)

    def one(t):
        return float(round_once(inst, y, base.child(t)).cost)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, range(trials)))
    return [one(t) for t in range(trials)]


@dataclass
class RunReport:
    command: list[str]
    instance_digest: str
    seed: int | None
    kind: str
    lp_value: float | None = None
    lower_bound: float | None = None
    trials: list[float] = field(default_factory=list)
    mean_cost: float | None = None
    max_cost: float | None = None
    bound: dict | None = None
    ratio: float | None = None
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = asdict(self)
        extra = doc.pop("extra")
        doc.update(extra)
        return doc


_NUM = (int, float)
_OPT_NUM = (int, float, type(None))
REPORT_SCHEMA = {
    "command": list, "instance_digest": str, "seed": (int, type(None)), "kind": str,
    "lp_value": _OPT_NUM, "lower_bound": _OPT_NUM, "trials": list, "mean_cost": _OPT_NUM,
    "max_cost": _OPT_NUM, "bound": (dict, type(None)), "ratio": _OPT_NUM, "timings": dict,
}


def validate_report(doc: dict) -> list[str]:
    """Problems with a solve/round/verify report; empty when it matches ``REPORT_SCHEMA``."""
    problems = [f"missing {k}" for k in REPORT_SCHEMA if k not in doc]
    problems += [f"{k} has type {type(doc[k]).__name__}" for k, t in REPORT_SCHEMA.items()
                 if k in doc and not isinstance(doc[k], t)]
    if not isinstance(doc.get("instance_digest"), str) or len(doc["instance_digest"]) != 64:
        problems.append("instance_digest must be a sha256 hex string")
    if not all(isinstance(c, _NUM) for c in doc.get("trials", [])):
        problems.append("trials must be numbers")
    if doc.get("ratio") is not None and doc.get("mean_cost") is not None and doc.get("lp_value"):
        if not math.isclose(doc["ratio"], doc["mean_cost"] / doc["lp_value"], rel_tol=1e-12):
            problems.append("ratio differs from mean_cost / lp_value")
    return problems


def _emit(doc: dict, table: list[tuple[str, object]]):
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    width = max((len(k) for k, _ in table), default=0)
    for k, v in table:
        if isinstance(v, float):
            v = f"{v:.6g}"
        sys.stderr.write(f"{k:<{width}}  {v}\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _load(args):
    inst, doc = instances.load_instance(args.input)
    kind = instances.kind_of(inst)
    if getattr(args, "kind", None) and args.kind != kind:
        raise UsageError(f"--kind {args.kind} does not match the file's kind {kind}")
    return inst, doc, kind


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_moments(args) -> int:
    if args.table:
        q_min, q_max, step = args.table
        if q_min < 1 or step <= 0 or q_max < q_min:
            raise UsageError("--table needs 1 <= q_min <= q_max and step > 0")
        sys.stdout.write("q\tA_q\n")
        for q in np.round(np.arange(q_min, q_max + step * 1e-9, step), 10):
            sys.stdout.write(f"{q:g}\t{fractional_bell(float(q)):.6f}\n")
    for q in args.q or []:
        sys.stdout.write(f"{fractional_bell(q):.6f}\n")
    if args.gain:
        bp = np.concatenate([[0.0], np.geomspace(1e-7, 1e5, 4000)])
        g = {"min1": lambda t: np.minimum(t, 1.0), "sqrt": np.sqrt}[args.gain]
        sys.stdout.write(f"{concave_gain(TabulatedConcave.from_function(g, bp)):.6f}\n")
    return EXIT_OK


def _solve(inst, eps):
    problem = inst.to_problem()
    return problem, relaxation.solve_relaxation(problem, eps)


def cmd_solve(args) -> int:
    inst, doc, kind = _load(args)
    problem, res = _solve(inst, args.eps)
    report = RunReport(args.argv, instances.digest(doc),
                       args.seed, kind, res.lp_value, res.lower_bound, timings=res.timings,
                       extra={"y_vector": res.y.tolist(),
                              "per_term_values": res.per_term_values,
                              "iterations": res.iterations, "eps": args.eps})
    _emit(report.to_json(), [("kind", kind), ("lp_value", res.lp_value),
                             ("lower_bound", res.lower_bound), ("iterations", res.iterations),
                             ("seconds", res.timings["total_s"])])
    return EXIT_OK


def _fractional(args, inst):
    if args.fractional:
        with open(args.fractional, encoding="utf-8") as fh:
            frac = json.load(fh)
        y = np.asarray(frac["y_vector"], dtype=float)
        if y.shape != (inst.dimension,):
            raise UsageError(f"fractional solution has {y.size} entries, expected {inst.dimension}")
        return y, float(frac["lp_value"]), frac.get("lower_bound")
    _, res = _solve(inst, args.eps)
    return res.y, res.lp_value, res.lower_bound


def cmd_round(args) -> int:
    inst, doc, kind = _load(args)
    start = time.perf_counter()
    y, lp_value, lower = _fractional(args, inst)
    costs = run_trials(inst, y, args.seed, args.trials, args.jobs)
    mean = float(np.mean(costs))
    bound = theoretical_bound(inst)
    report = RunReport(args.argv, instances.digest(doc), args.seed, kind,
                       lp_value, lower, costs, mean, float(np.max(costs)), bound,
                       mean / lp_value if lp_value > 0 else None,
                       {"total_s": time.perf_counter() - start})
    _emit(report.to_json(), [("kind", kind), ("lp_value", lp_value), ("trials", len(costs)),
                             ("mean_cost", mean), ("ratio", report.ratio),
                             ("bound", bound["value"])])
    return EXIT_OK


def cmd_verify(args) -> int:
    inst, doc, kind = _load(args)
    start = time.perf_counter()
    problem, res = _solve(inst, args.eps)
    bound = theoretical_bound(inst)
    out = {"lp_solver_value": res.lp_value, "bound": bound}
    lp = res.lp_value
    if args.oracle:
        out["opt"] = oracles.brute_force_opt(inst)[1]
        lp = oracles.explicit_lp_opt(problem).value
    out["lp"] = lp
    exact = args.exact or args.oracle
    if exact:
        expected = rounding.expected_rounded_cost_exact(res.y, inst, enumeration_cap())
        stderr = 0.0
    else:
        costs = run_trials(inst, res.y, args.seed, args.trials, args.jobs)
        expected = float(np.mean(costs))
        stderr = float(np.std(costs, ddof=1) / math.sqrt(len(costs))) if len(costs) > 1 else 0.0
    out["expected_alg_cost"] = expected
    out["expected_alg_cost_exact"] = exact
    # the rounding is applied to the solver's y, whose value is within (1 + eps) of lp
    limit = bound["value"] * res.lp_value
    out["ratio"] = expected / lp if lp > 0 else None
    checks = [expected <= limit + BOUND_TOL * max(1.0, limit) + 3 * stderr]
    if args.oracle:
        checks.append(lp <= out["opt"] + BOUND_TOL * max(1.0, out["opt"]))
        checks.append(lp <= res.lp_value + BOUND_TOL * max(1.0, lp))
        checks.append(res.lp_value <= (1 + args.eps) * lp + BOUND_TOL * max(1.0, lp))
    out["pass"] = all(checks)
    report = RunReport(args.argv, instances.digest(doc), args.seed, kind,
                       lp, res.lower_bound, bound=bound, ratio=out["ratio"],
                       mean_cost=expected, timings={"total_s": time.perf_counter() - start},
                       extra=out)
    table = [("kind", kind), ("lp", lp), ("expected_alg_cost", expected),
             ("ratio", out["ratio"]), ("bound", bound["value"]), ("pass", out["pass"])]
    if "opt" in out:
        table.insert(1, ("opt", out["opt"]))
    _emit(report.to_json(), table)
    return EXIT_OK if out["pass"] else EXIT_BOUND


def cmd_decoupling(args) -> int:
    qs = args.q or [2.0]
    if args.tightness:
        n = args.tightness
        con = cxlab.tightness_construction(n)
        rows = []
        for q in qs:
            lhs = con.sum_x.moment(q)
            rows.append({"q": q, "n": n, "moment_sum_x": lhs, "A_q": fractional_bell(q),
                         "ratio": lhs / fractional_bell(q)})
        doc = {"mode": "tightness", "n": n, "results": rows}
        if 2.0 in qs:
            doc["closed_form_second_moment"] = cxlab.tightness_second_moment(n)
        _emit(doc, [(f"q={r['q']:g}", r["ratio"]) for r in rows])
        return EXIT_OK
    rep = cxlab.decoupling_corpus(args.corpus_size, qs, args.seed)
    doc = {"mode": "corpus", **rep.to_json(), "holds": rep.holds}
    _emit(doc, [("items", rep.size), ("norm_violations", rep.norm_violations),
                ("cx_violations", rep.cx_violations), ("worst_norm_slack", rep.worst_norm_slack),
                ("worst_cx_slack", rep.worst_cx_slack)])
    return EXIT_OK if rep.holds else EXIT_BOUND


def cmd_bench(args) -> int:
    rows = []
    for k in range(args.count):
        inst = instances.generate(args.kind, args.seed + k)
        t0 = time.perf_counter()
        problem, res = _solve(inst, args.eps)
        rows.append({"seed": args.seed + k, "dimension": problem.dimension,
                     "terms": len(problem.terms), "lp_value": res.lp_value,
                     "iterations": res.iterations, "seconds": time.perf_counter() - t0})
    secs = [r["seconds"] for r in rows]
    doc = {"kind": args.kind, "eps": args.eps, "runs": rows,
           "mean_seconds": float(np.mean(secs)), "max_seconds": float(np.max(secs))}
    _emit(doc, [("kind", args.kind), ("runs", len(rows)), ("mean_seconds", doc["mean_seconds"]),
                ("max_seconds", doc["max_seconds"])])
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.family == "parallel-gap":
        inst = instances.parallel_gap(args.n, 2.0 if args.q is None else args.q)
    else:
        if not args.kind:
            raise UsageError("generate needs --kind or --family")
        params = {"routing": dict(vertices=args.vertices, demands=args.demands),
                  "loadbalance": dict(machines=args.machines, jobs=args.jobs),
                  "tree": dict(vertices=args.vertices),
                  "schedule": dict(machines=args.machines, jobs=args.jobs)}.get(args.kind)
        if params is None:
            raise UsageError(f"unknown kind {args.kind!r}")
        if args.q is not None:
            params["p" if args.kind == "schedule" else "q"] = args.q
        inst = instances.generate(args.kind, args.seed, **params)
    text = instances.dump_instance(inst)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="diseconomy", description="Configuration-LP rounding toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("moments", help="fractional Bell numbers and concave gains")
    m.add_argument("--q", type=float, action="append")
    m.add_argument("--table", type=float, nargs=3, metavar=("Q_MIN", "Q_MAX", "STEP"),
                   help="tab-separated table of A_q")
    m.add_argument("--gain", choices=["min1", "sqrt"], help="concave gain of min(t,1) or sqrt(t)")
    m.set_defaults(func=cmd_moments)

    def common(sp, need_input=True):
        sp.add_argument("--kind", choices=instances.KINDS)
        sp.add_argument("--input", required=need_input)
        sp.add_argument("--eps", type=float, default=0.01)
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve the relaxation")
    common(s)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("round", help="round a fractional solution")
    common(r)
    r.add_argument("--fractional", help="JSON report from solve")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_round)

    v = sub.add_parser("verify", help="check the rounding guarantee")
    common(v)
    v.add_argument("--exact", action="store_true", help="exact expectation by enumeration")
    v.add_argument("--oracle", action="store_true", help="also run brute-force oracles")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("decoupling", help="decoupling inequality experiments")
    d.add_argument("--corpus-size", type=int, default=1000)
    d.add_argument("--q", type=float, nargs="+")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--tightness", type=int, help="run the Bernoulli construction with this n")
    d.set_defaults(func=cmd_decoupling)

    b = sub.add_parser("bench", help="time the relaxation on generated instances")
    b.add_argument("--kind", choices=instances.KINDS, required=True)
    b.add_argument("--count", type=int, default=5)
    b.add_argument("--eps", type=float, default=0.01)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--kind")
    g.add_argument("--family", choices=["parallel-gap"])
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--q", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--vertices", type=int)
    g.add_argument("--demands", type=int)
    g.add_argument("--machines", type=int)
    g.add_argument("--jobs", type=int)
    g.add_argument("--output")
    g.set_defaults(func=cmd_generate)
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    try:
        return args.func(args)
    except (UsageError, InvalidInstance, InfeasiblePolytope, DomainError,
            json.JSONDecodeError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
