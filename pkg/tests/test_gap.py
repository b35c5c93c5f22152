from fractions import Fraction
from math import comb

import pytest

from clusterlp.errors import ValidationError
from clusterlp.exact import solve_exact
from clusterlp.gap import (build_line_graph_instance, cluster_size_bound_check, fractional_value, gap_report,
                           star_clustering, star_cost_count, star_cost_formula)
from clusterlp.instance import Clustering, objective_clustering


def test_line_graph_structure():
    lgi = build_line_graph_instance(5)
    assert lgi.instance.n == 10 and lgi.degree == 4
    # each base edge touches 2(n - 2) others
    assert all(lgi.instance.adjacency[v].sum() == 6 for v in range(10))
    assert lgi.instance.num_plus == 30
    with pytest.raises(ValidationError):
        build_line_graph_instance(2)


def test_fractional_solution_value(gap5):
    lgi, sol = gap5
    assert sol.objective(lgi.instance) == pytest.approx(float(fractional_value(5)))
    assert fractional_value(5) == Fraction(comb(5, 2) * 3, 2) == 15


@pytest.mark.parametrize("n", [3, 4, 5, 6, 9, 12])
def test_star_cost_three_ways(n):
    lgi = build_line_graph_instance(n)
    cost = objective_clustering(lgi.instance, star_clustering(lgi, range(n)))
    assert cost == star_cost_formula(n) == star_cost_count(n)
    assert star_cost_formula(n) / fractional_value(n) == Fraction(4, 3)


def test_star_cost_independent_of_order():
    lgi = build_line_graph_instance(6)
    costs = {objective_clustering(lgi.instance, star_clustering(lgi, order))
             for order in ([0, 1, 2, 3, 4, 5], [5, 3, 1, 0, 2, 4], [2, 0, 5, 4, 1, 3])}
    assert len(costs) == 1
    with pytest.raises(ValidationError):
        star_clustering(lgi, [0, 0, 1, 2, 3, 4])


def test_ratio_exact_up_to_200():
    for n in range(3, 201):
        assert star_cost_formula(n) / fractional_value(n) == Fraction(4, 3)
        assert star_cost_count(n) == star_cost_formula(n)


def test_cluster_size_bound():
    lgi5 = build_line_graph_instance(5)
    # one cluster on n=5: each vertex has 6 of the 9 others as +neighbors, and 2*6 >= 9
    assert cluster_size_bound_check(lgi5, Clustering.one_cluster(10))
    lgi8 = build_line_graph_instance(8)
    assert not cluster_size_bound_check(lgi8, Clustering.one_cluster(28))
    assert cluster_size_bound_check(lgi8, star_clustering(lgi8, range(8)))
    opt = solve_exact(lgi5.instance).witness
    assert cluster_size_bound_check(lgi5, opt)


def test_gap_report():
    rows = gap_report([4, 5, 7])
    assert [r.ratio for r in rows] == [Fraction(4, 3)] * 3
    n5 = rows[1]
    assert n5.opt == 15 and n5.lp_value == pytest.approx(15)
    assert n5.opt <= 20
    assert rows[2].opt is None and "exceed" in rows[2].note
    assert rows[0].to_json()["ratio"] == "4/3"
