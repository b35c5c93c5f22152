import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlp.errors import InfeasibleSolutionError, ValidationError
from clusterlp.exact import solve_exact
from clusterlp.instance import Clustering, Instance, generate_planted, generate_random, objective_clustering
from clusterlp.lp import ClusterLpSolution, solve_cluster_lp_exact
from clusterlp.rounding import (ALG3, ALG4, INDEPENDENT, AliasSampler, RuleSet, best_of,
                                estimate_edge_marginals, pivot_inclusion_probabilities,
                                round_classic_pivot, round_cluster_based, round_pivot)


def test_rule_set_validation():
    with pytest.raises(ValidationError):
        RuleSet("bad", 0.6, 0.5)
    assert ALG4.plus_class(np.array([0.4, 0.5, 0.57, 0.6])).tolist() == [0, 1, 1, 2]


def test_alias_sampler_frequencies():
    p = np.array([0.1, 0.0, 0.6, 0.3])
    draws = AliasSampler(p).sample(np.random.default_rng(0), 200_000)
    np.testing.assert_allclose(np.bincount(draws, minlength=4) / draws.size, p, atol=0.005)


def test_integral_solution_is_reproduced():
    c = Clustering(((0, 1, 2), (3, 4), (5,)))
    edges = [(0, 1), (0, 2), (1, 2), (3, 4)]
    inst = Instance.from_edges(6, edges)
    sol = ClusterLpSolution.from_clustering(c, inst)
    for seed in range(20):
        assert round_cluster_based(sol, seed) == c
        for rules in (ALG3, ALG4):
            assert round_pivot(sol, rules, seed).clustering == c
    res = best_of(sol, 1, 3)
    assert res.clustering == c and res.cost == 0


def test_all_separated_solution_gives_singletons():
    sol = ClusterLpSolution.from_clustering(Clustering.singletons(5), generate_random(5, 0.5, 2))
    for rules in (ALG3, ALG4, INDEPENDENT):
        assert round_pivot(sol, rules, 4).clustering == Clustering.singletons(5)


def test_empty_support_rejected():
    sol = ClusterLpSolution(3, {}, check=False)
    with pytest.raises(InfeasibleSolutionError):
        round_cluster_based(sol, 0)


def test_trace_invariants(fractional_n8):
    inst, sol = fractional_n8
    for seed in range(30):
        trace = round_pivot(sol, ALG4, seed)
        seen = [v for step in trace.steps for v in step.cluster]
        assert sorted(seen) == list(range(8))
        assert all(step.pivot in step.cluster and step.pivot in step.sampled_set for step in trace.steps)
        assert trace.clustering.n == 8


def test_classic_pivot_examples(bad_triangle):
    k5 = Instance.from_edges(5, [(a, b) for a in range(5) for b in range(a + 1, 5)])
    assert round_classic_pivot(k5, 1) == Clustering.one_cluster(5)
    assert round_classic_pivot(Instance(5), 1) == Clustering.singletons(5)
    # every pivot choice costs exactly one on the bad triangle
    costs = {objective_clustering(bad_triangle, round_classic_pivot(bad_triangle, s)) for s in range(50)}
    assert costs == {1}


def test_best_of_rejects_zero_trials(fractional_n8):
    with pytest.raises(ValidationError):
        best_of(fractional_n8[1], 0, 0)


@given(st.integers(3, 8), st.floats(0.1, 0.9), st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_best_of_is_consistent(n, p, seed):
    inst = generate_random(n, p, seed)
    sol = solve_cluster_lp_exact(inst)
    res = best_of(sol, seed, 5, ALG4)
    assert res.cost == objective_clustering(inst, res.clustering)
    assert res.cost == res.per_trial_best.min()
    assert res.cost >= solve_exact(inst).opt_value
    assert best_of(sol, seed, 5, ALG4).clustering == res.clustering


def test_cluster_based_separation_on_gap_instance(gap5):
    # stars sharing a base vertex: x = 1/2, separation 2x/(1+x) = 2/3
    lgi, sol = gap5
    est = estimate_edge_marginals(sol, "cluster", 40_000, seed=3)["separation"]
    e, f = lgi.index_of(0, 1), lgi.index_of(1, 2)
    assert est.estimate[e, f] == pytest.approx(2 / 3, abs=0.015)
    assert est.max_z() < 5


def test_pivot_marginals_match_closed_form(fractional_n8):
    inst, sol = fractional_n8
    for rules in (ALG3, ALG4):
        est = estimate_edge_marginals(sol, rules, 20_000, seed=5)["inclusion"]
        assert est.max_abs_error() < 0.02
    # spot-check the closed form itself
    x = sol.x_matrix()
    y = sol.y_pair_matrix
    p = pivot_inclusion_probabilities(sol, ALG3, 0)
    for v in range(1, 8):
        if not inst.is_plus(0, v):
            assert p[v] == pytest.approx(1 - x[0, v])
        elif x[0, v] <= 0.4:
            assert p[v] == 1
        else:
            assert p[v] == pytest.approx(y[0, v])


def test_deterministic_in_seed(fractional_n8):
    _, sol = fractional_n8
    assert round_pivot(sol, ALG3, 11).clustering == round_pivot(sol, ALG3, 11).clustering
    assert round_cluster_based(sol, 11) == round_cluster_based(sol, 11)


def test_planted_recovery():
    inst = generate_planted(12, 3, 0.0, 2)
    sol = solve_cluster_lp_exact(inst)
    assert best_of(sol, 0, 2).cost == 0
