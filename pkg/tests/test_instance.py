import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlp.errors import ValidationError
from clusterlp.instance import (Clustering, FractionalAssignment, Instance, generate_planted,
                                generate_random, objective_clustering, objective_fractional,
                                read_clustering, read_instance, write_clustering, write_instance)


def test_objective_examples(bad_triangle):
    assert objective_clustering(Instance.from_edges(2, [(0, 1)]), Clustering(((0, 1),))) == 0
    assert objective_clustering(bad_triangle, Clustering.one_cluster(3)) == 1
    assert objective_clustering(bad_triangle, Clustering.singletons(3)) == 2


@pytest.mark.parametrize("clusters", [((0, 1), (1, 2)), ((0,), (2,)), ((0, 1), ())])
def test_invalid_partitions_rejected(clusters):
    with pytest.raises(ValidationError):
        Clustering(clusters)


def test_objective_wrong_size(bad_triangle):
    with pytest.raises(ValidationError):
        objective_clustering(bad_triangle, Clustering.singletons(4))


def test_objective_fractional_examples():
    n = 3
    assert objective_fractional(Instance(n), FractionalAssignment.from_matrix(np.ones((n, n)) - np.eye(n))) == 0
    full = Instance.from_edges(n, [(0, 1), (0, 2), (1, 2)])
    assert objective_fractional(full, FractionalAssignment.from_matrix(np.zeros((n, n)))) == 0
    x = FractionalAssignment(3, {(0, 1): 0.5, (0, 2): 1.0, (1, 2): 1.0})
    assert objective_fractional(Instance.from_edges(3, [(0, 1)]), x) == pytest.approx(0.5)


def test_fractional_missing_pair():
    with pytest.raises(ValidationError):
        objective_fractional(Instance(3), FractionalAssignment(3, {(0, 1): 0.5}))


@given(st.integers(1, 9), st.floats(0, 1), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_objective_matches_pair_count(n, p, seed):
    # oracle: count disagreements pair by pair from the labels
    inst = generate_random(n, p, seed)
    labels = np.random.default_rng(seed).integers(0, 3, n)
    c = Clustering.from_labels(labels)
    expected = sum((labels[u] == labels[v]) != inst.is_plus(u, v) for u in range(n) for v in range(u + 1, n))
    assert objective_clustering(inst, c) == expected
    assert objective_fractional(inst, FractionalAssignment.from_clustering(c)) == pytest.approx(expected)


def test_generate_random_examples():
    assert generate_random(1, 0.7, 5).num_plus == 0
    assert generate_random(4, 1.0, 7).num_plus == 6
    assert generate_random(10, 0.5, 1) == generate_random(10, 0.5, 1)
    with pytest.raises(ValidationError):
        generate_random(5, 1.5, 0)


def test_planted_without_noise_is_clusterable():
    inst = generate_planted(12, 3, 0.0, 4)
    comp = Clustering.from_labels(_components(inst))
    assert objective_clustering(inst, comp) == 0
    assert len(comp.clusters) == 3


def _components(inst):
    lab = -np.ones(inst.n, dtype=int)
    for s in range(inst.n):
        if lab[s] < 0:
            stack, lab[s] = [s], s
            while stack:
                u = stack.pop()
                for v in inst.plus_neighbors(u):
                    if lab[v] < 0:
                        lab[v] = s
                        stack.append(v)
    return lab


def test_instance_round_trip(tmp_path):
    inst = generate_random(6, 0.5, 3)
    write_instance(inst, tmp_path / "i.json")
    assert read_instance(tmp_path / "i.json") == inst
    c = Clustering(((0, 3), (1,), (2, 4, 5)))
    write_clustering(c, tmp_path / "c.json")
    assert read_clustering(tmp_path / "c.json") == c


@pytest.mark.parametrize("edges,fragment", [([[0, 1], [1, 0]], "duplicates"), ([[0, 0]], "self-loop"),
                                            ([[0, 5]], "outside"), ([[0, "1"]], "pair of integers")])
def test_instance_parse_errors(tmp_path, edges, fragment):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 3, "plus_edges": edges}))
    with pytest.raises(ValidationError, match=fragment):
        read_instance(path)


def test_instance_parse_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 3,\n "plus_edges": [[0, 1],]}')
    with pytest.raises(ValidationError, match="line 2"):
        read_instance(path)


def test_instance_rejects_self_loop_in_constructor():
    with pytest.raises(ValidationError):
        Instance.from_edges(2, [(1, 1)])
