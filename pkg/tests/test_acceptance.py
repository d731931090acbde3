"""The ten acceptance criteria, each at its stated tolerance and time limit."""

import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from diseconomy.cxlab import decoupling_corpus, tightness_construction, tightness_second_moment
from diseconomy.instances import (parallel_gap, random_loadbalance, random_routing,
                                  random_schedule)
from diseconomy.moments import PowerCost, TabulatedConcave, concave_gain, fractional_bell
from diseconomy.oracles import brute_force_opt, explicit_H, explicit_lp_opt
from diseconomy.polytopes import TreeInstance, matroid_base_polytope
from diseconomy.problem import ProblemInstance, TermData
from diseconomy.relaxation import (discretize, estimate_opt_bound, evaluate_H,
                                   naive_convex_relaxation, solve_relaxation, subgradient)
from diseconomy.rounding import (expected_rounded_cost_exact, expected_schedule_cost,
                                 multilinear_F, pipage_round)


def _fractional(y, tol=1e-7):
    return bool(np.any((y > tol) & (y < 1 - tol)))


def _interior_point(problem, rng, k=3):
    """Random convex combination of ``k`` vertices found by random-cost minimization."""
    poly = problem.polytope
    verts = np.array([poly.linear_minimize(rng.uniform(0, 1, poly.dimension)) for _ in range(k)])
    return rng.dirichlet(np.ones(k)) @ verts


def _config_value(problem, y):
    value = sum(evaluate_H(t, y).value for t in problem.terms)
    if problem.linear is not None:
        value += float(problem.linear @ y)
    return value


def _series_moment(q, terms=60):
    """sum_k k^q e^-1 / k!, summed directly in floating point."""
    return math.fsum(k ** q * math.exp(-1 - math.lgamma(k + 1)) for k in range(1, terms))


def test_criterion_01_poisson_moments(criterion):
    with criterion(1, "fractional Bell numbers", 1.0) as c:
        for q, ref in [(1, 1.0), (1.25, 1.163), (1.5, 1.373), (1.75, 1.645), (2, 2.0)]:
            assert abs(fractional_bell(q) - ref) <= 5e-4
        assert abs(fractional_bell(3) - 5.0) <= 1e-6
        assert abs(fractional_bell(3) - _series_moment(3)) <= 1e-6
        c.note(f"A_1.5={fractional_bell(1.5):.6f}")


def test_criterion_02_concave_gains(criterion):
    with criterion(2, "concave gains", 5.0) as c:
        bp = np.concatenate([[0.0], np.geomspace(1e-7, 1e5, 4000)])
        b_min = concave_gain(TabulatedConcave((0.0, 1.0, 50.0), (0.0, 1.0, 1.0)), t_max=1.0)
        b_sqrt = concave_gain(TabulatedConcave.from_function(np.sqrt, bp))
        assert abs(b_min - (1 - 1 / math.e)) <= 1e-3
        assert abs(b_sqrt - 0.773) <= 2e-3
        c.note(f"B(min)={b_min:.6f}, B(sqrt)={b_sqrt:.6f}")


def test_criterion_03_decoupling_corpus(criterion):
    with criterion(3, "decoupling corpus", 120.0) as c:
        rep = decoupling_corpus(1000, [1, 1.5, 2, 3], seed=2024, tol=1e-9)
        assert rep.size >= 1000
        assert rep.norm_violations == 0
        assert rep.cx_violations == 0
        c.note(f"worst norm slack {rep.worst_norm_slack:.3g}, worst cx slack "
               f"{rep.worst_cx_slack:.3g}")


def test_criterion_04_tightness(criterion):
    with criterion(4, "tightness construction", 1.0) as c:
        n = 10_000
        closed = tightness_second_moment(n)
        summed = tightness_construction(n).sum_x.moment(2)
        assert closed == pytest.approx(1 + (n - 1) / n)
        assert abs(summed - closed) <= 1e-9
        assert closed >= 0.999 * fractional_bell(2)
        assert summed >= 0.999 * fractional_bell(2)
        c.note(f"E[(sum X)^2]={summed:.6f}")


def _routing_corpus():
    rng = np.random.default_rng(55)
    out = []
    while len(out) < 50:
        out.append(random_routing(rng, vertices=int(rng.integers(3, 9)),
                                  demands=int(rng.integers(1, 4)), max_size=3,
                                  q=[Fraction(3, 2), 2, 3][len(out) % 3],
                                  extra_edges=int(rng.integers(2, 8))))
    return out


def test_criterion_05_routing(criterion):
    with criterion(5, "routing end to end", 300.0) as c:
        for n in (2, 4, 8):
            problem = parallel_gap(n, 2).to_problem()
            assert abs(solve_relaxation(problem, eps=0.01).lp_value - 1.0) <= 1e-6
            naive, _ = naive_convex_relaxation(problem)
            assert abs(naive - n ** (1 - 2)) <= 1e-6
            assert brute_force_opt(parallel_gap(n, 2))[1] == 1.0
        worst, frac, interior_worst = 0.0, 0, 0.0
        rng = np.random.default_rng(505)
        for inst in _routing_corpus():
            problem = inst.to_problem()
            q = inst.max_exponent()
            lp = explicit_lp_opt(problem).value
            _, opt = brute_force_opt(inst)
            res = solve_relaxation(problem, eps=0.01)
            assert lp <= opt + 1e-7
            assert lp - 1e-7 <= res.lp_value <= 1.01 * lp + 1e-7
            cost = expected_rounded_cost_exact(res.y, inst)
            assert cost <= fractional_bell(q) * res.lp_value + 1e-7
            worst = max(worst, cost / (fractional_bell(q) * res.lp_value))
            frac += _fractional(res.y)
            # the guarantee holds at every point of the polytope, not just the optimum
            y = _interior_point(problem, rng)
            cost = expected_rounded_cost_exact(y, inst)
            assert cost <= fractional_bell(q) * _config_value(problem, y) + 1e-7
            interior_worst = max(interior_worst, cost / (fractional_bell(q) * _config_value(problem, y)))
        c.note(f"50 instances ({frac} with fractional y), worst E[cost]/(A_q LP)={worst:.4f}; "
               f"50 interior points, worst {interior_worst:.4f}")


def test_criterion_06_load_balancing(criterion):
    with criterion(6, "load balancing", 180.0) as c:
        rng = np.random.default_rng(66)
        worst, frac, interior_worst = 0.0, 0, 0.0
        for k in range(60):
            q = [Fraction(3, 2), 2, 3][k % 3]
            inst = random_loadbalance(rng, int(rng.integers(1, 4)), int(rng.integers(1, 6)),
                                      max_time=5, q=q, forbid=0.3 * (k % 2))
            res = solve_relaxation(inst.to_problem(), eps=0.01)
            cost = expected_rounded_cost_exact(res.y, inst)
            Aq = fractional_bell(float(q))
            assert cost <= Aq * res.lp_value + 1e-7
            ratio = (cost / res.lp_value) ** (1 / float(q))
            assert ratio <= Aq ** (1 / float(q)) + 1e-9
            worst = max(worst, ratio / Aq ** (1 / float(q)))
            frac += _fractional(res.y)
            problem = inst.to_problem()
            x = _interior_point(problem, rng)
            cost = expected_rounded_cost_exact(x, inst)
            assert cost <= Aq * _config_value(problem, x) + 1e-7
            interior_worst = max(interior_worst, cost / (Aq * _config_value(problem, x)))
        c.note(f"60 instances ({frac} with fractional y), worst norm ratio / A_q^(1/q)={worst:.4f}; "
               f"60 interior points, worst E[cost]/(A_q H)={interior_worst:.4f}")


def test_criterion_07_scheduling(criterion):
    with criterion(7, "scheduling", 300.0) as c:
        rng = np.random.default_rng(77)
        worst, frac, interior_worst = 0.0, 0, 0.0
        for k in range(30):
            p = 1 + k % 2
            inst = random_schedule(rng, int(rng.integers(1, 3)), int(rng.integers(1, 5)),
                                   max_time=3, p=p)
            res = solve_relaxation(inst.to_problem(), eps=0.01)
            cost = expected_rounded_cost_exact(res.y, inst)
            assert cost == pytest.approx(expected_schedule_cost(res.y, inst), rel=1e-9, abs=1e-9)
            bound = 2 ** p * fractional_bell(p) * res.lp_value
            assert cost <= bound + 1e-7
            worst = max(worst, cost / bound)
            frac += _fractional(res.y)
            problem = inst.to_problem()
            x = _interior_point(problem, rng)
            cost = expected_schedule_cost(x, inst)
            assert cost == pytest.approx(expected_rounded_cost_exact(x, inst), rel=1e-9)
            bound = 2 ** p * fractional_bell(p) * _config_value(problem, x)
            assert cost <= bound + 1e-7
            interior_worst = max(interior_worst, cost / bound)
        c.note(f"30 instances ({frac} with fractional x), worst E[cost]/(2^p A_p LP)={worst:.4f}; "
               f"30 interior points, worst {interior_worst:.4f}")




def _connected_atlas():
    return [g for g in nx.graph_atlas_g()
            if 2 <= g.number_of_nodes() <= 6 and nx.is_connected(g)]


def test_criterion_08_spanning_tree(criterion):
    with criterion(8, "spanning tree pipage", 300.0) as c:
        graphs = _connected_atlas()
        assert len(graphs) == 142  # every connected graph on 2..6 vertices
        rng = np.random.default_rng(88)
        runs = frac = 0
        for g in graphs:
            for q in (Fraction(3, 2), Fraction(2)):
                edges = [(u, v, int(rng.integers(1, 4))) for u, v in g.edges()]
                inst = TreeInstance(g.number_of_nodes(), edges, q)
                res = solve_relaxation(inst.to_problem(), eps=0.01)
                F0 = multilinear_F(res.y, inst)
                sol = pipage_round(res.y, inst)
                assert matroid_base_polytope(inst).contains(sol.to_vector(inst))
                assert nx.is_tree(nx.Graph([edges[k][:2] for k in sol.edges]))
                assert len(sol.edges) == g.number_of_nodes() - 1
                assert all(a >= b - 1e-7 for a, b in zip(sol.trace, sol.trace[1:]))
                assert sol.cost <= F0 + 1e-7
                assert F0 <= fractional_bell(float(q)) * res.lp_value + 1e-7
                opt = brute_force_opt(inst)[1]
                assert sol.cost >= opt - 1e-9
                runs += 1
                # same chain from a random point of the base polytope
                problem = inst.to_problem()
                x = _interior_point(problem, rng)
                Fx = multilinear_F(x, inst)
                sol = pipage_round(x, inst)
                assert all(a >= b - 1e-7 for a, b in zip(sol.trace, sol.trace[1:]))
                assert opt - 1e-9 <= sol.cost <= Fx + 1e-7
                assert Fx <= fractional_bell(float(q)) * _config_value(problem, x) + 1e-7
                frac += _fractional(x)
        c.note(f"{len(graphs)} graphs x 2 exponents = {runs} LP runs plus {runs} interior "
               f"points ({frac} fractional)")


def _discretization_corpus(rng):
    for k in range(60):
        q = [Fraction(3, 2), 2, 3][k % 3]
        if k % 2:
            yield random_loadbalance(rng, int(rng.integers(2, 4)), int(rng.integers(2, 5)),
                                     max_time=9, q=q)
        else:
            yield random_routing(rng, vertices=int(rng.integers(3, 6)),
                                 demands=int(rng.integers(1, 3)), max_size=3, q=q,
                                 extra_edges=3, max_scale=5)


def test_criterion_09_discretization(criterion):
    with criterion(9, "discretization bounds", 120.0) as c:
        rng = np.random.default_rng(99)
        checks = changed = 0
        for inst in _discretization_corpus(rng):
            problem = inst.to_problem()
            _, opt = brute_force_opt(problem)
            bound = next(b for b in estimate_opt_bound(problem) if b >= opt)
            for eps in (0.1, 0.3):
                new, plan = discretize(problem, eps, bound)
                _, opt_new = brute_force_opt(new)
                assert opt_new <= opt + 1e-9
                assert opt <= opt_new + 2 * eps * bound + 1e-9
                checks += 1
                changed += any(a.coeffs != b.coeffs for a, b in zip(problem.terms, new.terms))
        c.note(f"{checks} checks on 60 instances, {changed} with rounded coefficients")


def _random_term(rng):
    m = int(rng.integers(1, 7))
    coeffs = {i: int(rng.integers(1, 6)) for i in range(m)}
    cost = PowerCost(float(rng.integers(1, 4)), float(rng.choice([1.0, 1.5, 2.0, 2.5, 3.0])))
    return TermData.build(0, coeffs, cost)


def test_criterion_10_h_properties(criterion):
    with criterion(10, "H_j convexity and subgradients", 120.0) as c:
        rng = np.random.default_rng(1010)
        for _ in range(250):
            term = _random_term(rng)
            m = term.size
            y, z = rng.uniform(0, 1, (2, m))
            # push some coordinates to the box boundary
            y[rng.random(m) < 0.2] = 1.0
            z[rng.random(m) < 0.2] = 0.0
            lam = float(rng.uniform())
            hy, hz = evaluate_H(term, y), evaluate_H(term, z)
            mid = evaluate_H(term, lam * y + (1 - lam) * z).value
            assert mid <= lam * hy.value + (1 - lam) * hz.value + 1e-7
            g = subgradient(hy.certificate, m)
            assert abs(g(y) - hy.value) <= 1e-7 * max(1.0, hy.value)
            assert g(z) <= hz.value + 1e-7
            assert abs(hy.value - explicit_H(term, y)) <= 1e-7 * max(1.0, hy.value)
        # the same agreement through the full explicit LP with y fixed
        for _ in range(20):
            terms = [TermData.build(j, {i: int(rng.integers(1, 4)) for i in range(6)
                                        if rng.random() < 0.7}, PowerCost(1, 2))
                     for j in range(2)]
            poly = matroid_base_polytope(TreeInstance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1),
                                                          (0, 1, 1), (1, 2, 1), (0, 2, 1)]))
            verts = np.array(list(poly.list_vertices()))
            y = rng.dirichlet(np.ones(len(verts))) @ verts
            total = sum(evaluate_H(t, y).value for t in terms)
            ref = explicit_lp_opt(ProblemInstance(terms, poly), fixed_y=y).value
            assert abs(total - ref) <= 1e-7 * max(1.0, ref)
        c.note("250 triples, 20 fixed-y explicit LPs")
