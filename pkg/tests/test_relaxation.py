from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diseconomy.instances import parallel_gap, random_loadbalance, random_routing, random_tree
from diseconomy.moments import PowerCost, TabulatedConvex
from diseconomy.oracles import brute_force_opt, explicit_H, explicit_lp_opt
from diseconomy.polytopes import (Demand, Edge, LoadBalancingInstance, RoutingInstance,
                                  assignment_polytope)
from diseconomy.problem import InstanceTooLarge, ProblemInstance, TermData
from diseconomy.relaxation import (ConvergenceFailure, discretize, estimate_opt_bound,
                                   evaluate_H, knapsack_separate, naive_convex_relaxation,
                                   opt_bound_range, power_of_two_candidates, solve_relaxation,
                                   subgradient)

SQUARE = PowerCost(1, 2)


def _term(coeffs, cost=SQUARE, index=0):
    return TermData.build(index, dict(enumerate(coeffs)), cost)


def _random_term(rng, max_size=6):
    m = int(rng.integers(1, max_size + 1))
    coeffs = rng.integers(1, 5, size=m).tolist()
    q = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
    return _term(coeffs, PowerCost(float(rng.integers(1, 4)), q))


class TestKnapsackSeparate:
    def test_negative_duals_none(self):
        assert knapsack_separate(_term([1, 1]), 0.0, [-1.0, -1.0]) is None

    def test_max_violation_budget(self):
        assert knapsack_separate(_term([1, 1]), 0.0, [3.0, 3.0]) == (0, 1)

    def test_equality_is_not_a_violation(self):
        assert knapsack_separate(_term([1, 1]), 0.0, [1.0, 1.0], tol=1e-9) is None

    def test_positive_xi_caught_by_empty_set(self):
        assert knapsack_separate(_term([1, 1]), 0.5, [-1.0, -1.0]) == ()

    def test_tie_prefers_lowest_indices(self):
        # {0} and {1} both have profit 2 at budget 1; {0, 1} only reaches 4 - 4 = 0
        assert knapsack_separate(_term([1, 1]), 0.0, [2.0, 2.0]) == (0,)

    def test_budget_cap(self):
        with pytest.raises(InstanceTooLarge):
            knapsack_separate(_term([10**6, 1]), 0.0, [1.0, 1.0])

    def test_matches_subset_enumeration(self, rng):
        import itertools
        for _ in range(100):
            term = _random_term(rng)
            xi = float(rng.normal())
            eta = rng.normal(2.0, 3.0, term.size)
            best = max(xi + sum(eta[list(S)]) - term.set_cost(S)
                       for r in range(term.size + 1)
                       for S in itertools.combinations(range(term.size), r))
            S = knapsack_separate(term, xi, eta)
            if best <= 1e-9:
                assert S is None
            else:
                local = [term.support.index(i) for i in S]
                assert xi + eta[local].sum() - term.set_cost(local) == pytest.approx(best)


class TestEvaluateH:
    def test_full_marginals(self):
        ev = evaluate_H(_term([1, 1]), [1.0, 1.0])
        assert ev.value == pytest.approx(4.0)
        assert [(S, round(z, 9)) for S, z in ev.columns] == [((0, 1), 1.0)]

    def test_half_marginals(self):
        ev = evaluate_H(_term([1, 1]), [0.5, 0.5])
        assert ev.value == pytest.approx(1.0)
        assert sorted((S, round(z, 9)) for S, z in ev.columns) == [((0,), 0.5), ((1,), 0.5)]

    def test_zero_point(self):
        ev = evaluate_H(_term([2, 3, 1]), np.zeros(3))
        assert ev.value == pytest.approx(0.0)
        assert ev.columns == [((), 1.0)]

    def test_empty_term(self):
        term = TermData.build(0, {}, SQUARE)
        assert evaluate_H(term, np.zeros(2)).value == 0.0

    def test_rejects_out_of_box(self):
        with pytest.raises(ValueError):
            evaluate_H(_term([1]), [1.5])

    def test_column_invariants(self, rng):
        for _ in range(50):
            term = _random_term(rng)
            y = rng.uniform(0, 1, term.size)
            ev = evaluate_H(term, y)
            z = np.array([w for _, w in ev.columns])
            assert z.sum() == pytest.approx(1.0, abs=1e-9)
            for k, i in enumerate(term.support):
                marg = sum(w for S, w in ev.columns if i in S)
                assert marg == pytest.approx(y[k], abs=1e-9)
            assert len(ev.columns) <= term.size + 2
            primal = sum(w * term.cost(sum(float(term.coeffs[term.support.index(i)]) for i in S))
                         for S, w in ev.columns)
            assert primal == pytest.approx(ev.value, rel=1e-9, abs=1e-9)
            # weak duality
            assert ev.certificate.value <= primal + 1e-8
            assert ev.lower_bound <= ev.value + 1e-12

    def test_matches_explicit_lp(self, rng):
        for _ in range(60):
            term = _random_term(rng)
            y = rng.uniform(0, 1, term.size)
            assert evaluate_H(term, y).value == pytest.approx(explicit_H(term, y), rel=1e-7,
                                                              abs=1e-9)

    def test_tabulated_cost(self):
        f = TabulatedConvex((0.0, 1.0, 2.0, 3.0), (0.0, 1.0, 3.0, 6.0), smoothness=2.0)
        term = _term([1, 2], cost=f)
        y = np.array([0.3, 0.6])
        assert evaluate_H(term, y).value == pytest.approx(explicit_H(term, y))

    def test_column_cap_reports_bounds(self):
        term = _term([1, 2, 3, 4, 5, 6], PowerCost(1, 3))
        y = np.array([0.9, 0.1, 0.8, 0.2, 0.7, 0.3])
        exact = explicit_H(term, y)
        try:
            ev = evaluate_H(term, y, max_columns=1)
        except ConvergenceFailure as exc:
            assert exc.lower <= exact + 1e-9 <= exc.upper + 2e-9
        else:
            assert ev.value == pytest.approx(exact, rel=1e-6)


class TestSubgradient:
    def test_tight_at_evaluation_point(self):
        ev = evaluate_H(_term([1, 1]), [1.0, 1.0])
        g = subgradient(ev.certificate, 2)
        assert g([1.0, 1.0]) == pytest.approx(4.0)
        assert g([0.5, 0.5]) <= 1.0 + 1e-9

    def test_random_minorant(self, rng):
        for _ in range(20):
            term = _random_term(rng)
            g = subgradient(evaluate_H(term, rng.uniform(0, 1, term.size)).certificate, term.size)
            for _ in range(5):
                z = rng.uniform(0, 1, term.size)
                assert g(z) <= evaluate_H(term, z).value + 1e-7

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_convexity(self, seed):
        rng = np.random.default_rng(seed)
        term = _random_term(rng)
        a, b = rng.uniform(0, 1, (2, term.size))
        lam = float(rng.uniform())
        mid = evaluate_H(term, lam * a + (1 - lam) * b).value
        assert mid <= lam * evaluate_H(term, a).value + (1 - lam) * evaluate_H(term, b).value + 1e-7


class TestSolveRelaxation:
    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_gap_family(self, n):
        res = solve_relaxation(parallel_gap(n, 2).to_problem(), eps=0.01)
        assert res.lp_value == pytest.approx(1.0, abs=1e-6)
        assert res.lower_bound <= res.lp_value + 1e-9

    def test_naive_relaxation_is_weak(self):
        for n in (2, 4, 8):
            value, _ = naive_convex_relaxation(parallel_gap(n, 2).to_problem())
            assert value == pytest.approx(n ** (1 - 2), abs=1e-6)

    def test_single_job_two_machines(self):
        problem = LoadBalancingInstance([[1], [1]]).to_problem()
        assert solve_relaxation(problem).lp_value == pytest.approx(1.0, abs=1e-6)
        assert explicit_lp_opt(problem).value == pytest.approx(1.0, abs=1e-9)

    def test_empty_demand_set(self):
        inst = RoutingInstance(2, [Edge("a", 0, 1)], [])
        assert solve_relaxation(inst.to_problem()).lp_value == 0.0

    def test_unpacks(self, gap4):
        y, value, terms = solve_relaxation(gap4.to_problem())
        assert len(terms) == 4 and y.shape == (4,)

    def test_rejects_bad_eps(self, gap4):
        with pytest.raises(ValueError):
            solve_relaxation(gap4.to_problem(), eps=0)

    def test_soundness_at_integral_points(self, rng):
        for inst in (random_routing(rng, vertices=4, demands=2, extra_edges=2),
                     random_loadbalance(rng, 2, 3), random_tree(rng, 4, 2)):
            problem = inst.to_problem()
            for y in problem.polytope.list_vertices():
                total = sum(evaluate_H(t, y).value for t in problem.terms)
                assert total == pytest.approx(problem.objective(y), abs=1e-8)

    def test_agrees_with_explicit_lp(self, rng):
        for inst in (random_routing(rng, vertices=4, demands=2, extra_edges=2),
                     random_loadbalance(rng, 2, 3), random_tree(rng, 4, 2),
                     random_loadbalance(rng, 3, 2, q=Fraction(3, 2))):
            problem = inst.to_problem()
            ref = explicit_lp_opt(problem).value
            res = solve_relaxation(problem, eps=0.01)
            assert ref - 1e-7 <= res.lp_value <= 1.01 * ref + 1e-7
            assert problem.polytope.contains(res.y, tol=1e-7)
            assert res.lower_bound <= ref + 1e-7


def _single_var_problem(d, cost=SQUARE):
    poly = assignment_polytope(LoadBalancingInstance([[1]]))
    return ProblemInstance([TermData.build(0, {0: d}, cost)], poly)


class TestDiscretize:
    def test_formula_example(self):
        new, plan = discretize(_single_var_problem(10), eps=0.4, opt_bound=100)
        assert plan.smoothness == 2.0
        assert plan.eta == Fraction(1, 20)
        assert plan.scales == [10]
        assert plan.deltas == [Fraction(1, 5)]
        assert plan.coefficients == [{0: Fraction(10)}]
        assert plan.forced_zero == frozenset()
        assert new.terms[0].coeffs == (Fraction(10),)

    def test_expensive_variable_forced(self):
        new, plan = discretize(_single_var_problem(10), eps=0.4, opt_bound=50)
        assert plan.forced_zero == frozenset({0})
        assert new.terms[0].size == 0
        assert new.upper_bounds()[0] == 0.0

    def test_plan_invariants(self, rng):
        for _ in range(20):
            inst = random_loadbalance(rng, 2, 3, max_time=9)
            problem = inst.to_problem()
            eps = float(rng.choice([0.1, 0.3]))
            new, plan = discretize(problem, eps, opt_bound=64)
            k, n = len(problem.terms), problem.dimension
            for old, t, delta in zip(problem.terms, new.terms, plan.deltas):
                orig = dict(zip(old.support, old.coeffs))
                for i, d in zip(t.support, t.coeffs):
                    assert d <= orig[i]
                    assert (d / delta).denominator == 1
                    assert d / delta <= k * n / (plan.eps * plan.eta)
                    assert i not in plan.forced_zero

    def test_tabulated_needs_smoothness(self):
        f = TabulatedConvex((0.0, 1.0, 2.0), (0.0, 1.0, 3.0))
        with pytest.raises(ValueError):
            discretize(_single_var_problem(1, f), 0.1, 10)
        _, plan = discretize(_single_var_problem(1, f), 0.1, 10, smoothness=2.0)
        assert plan.smoothness == 2.0

    def test_bad_opt_bound(self):
        with pytest.raises(ValueError):
            discretize(_single_var_problem(1), 0.1, 0)


class TestOptBound:
    def test_power_candidates(self):
        assert list(power_of_two_candidates(3, 100)) == [4, 8, 16, 32, 64, 128]
        assert list(power_of_two_candidates(1, 1)) == [1]
        assert list(power_of_two_candidates(0, 0)) == [0]

    def test_gap_range(self, gap4):
        problem = gap4.to_problem()
        assert opt_bound_range(problem) == (1.0, 4.0)
        assert list(estimate_opt_bound(problem)) == [1, 2, 4]

    def test_all_zero_instance(self):
        problem = _single_var_problem(0)
        assert list(estimate_opt_bound(problem)) == [0]

    def test_some_candidate_brackets_opt(self, rng):
        inst = random_loadbalance(rng, 2, 3)
        problem = inst.to_problem()
        _, opt = brute_force_opt(inst)
        cands = list(estimate_opt_bound(problem))
        assert cands[-1] >= opt
