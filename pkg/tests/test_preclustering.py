import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlp.errors import ValidationError
from clusterlp.exact import is_good_clustering, restricted_growth_strings
from clusterlp.instance import Clustering, Instance, generate_planted, generate_random, objective_clustering
from clusterlp.preclustering import (audit_preclustering, averaged_weights, build_admissible, build_atoms,
                                     dense_atom_violations, enforce_a1, precluster)


def _complete(n):
    return Instance.from_edges(n, itertools.combinations(range(n), 2))


def _two_cliques():
    a, b = range(8), range(8, 16)
    edges = list(itertools.combinations(a, 2)) + list(itertools.combinations(b, 2)) + [(7, 8)]
    return Instance.from_edges(16, edges), Clustering((tuple(a), tuple(b)))


def test_atoms_trivial_cases():
    assert build_atoms(_complete(6), start=Clustering.one_cluster(6)) == Clustering.one_cluster(6)
    atoms = build_atoms(Instance(5), seed=3)
    assert all(len(k) == 1 for k in atoms.clusters)


def test_two_cliques_with_bridge():
    # Each bridge endpoint has |N+ △ C| = 1 > 0.05 * 8, and one marked vertex already
    # reaches the beta|C|/3 quota, so both cliques dissolve into singletons.
    inst, cliques = _two_cliques()
    atoms = build_atoms(inst, beta=0.1, start=cliques)
    assert all(len(k) == 1 for k in atoms.clusters)
    # with a larger beta the bridge marks nobody and the cliques survive
    assert build_atoms(inst, beta=0.3, start=cliques) == cliques


@given(st.integers(2, 30), st.floats(0.05, 0.95), st.integers(0, 2**32), st.floats(0.05, 0.5))
@settings(max_examples=60, deadline=None)
def test_dense_atom_lemma(n, p, seed, beta):
    inst = generate_random(n, p, seed) if seed % 2 else generate_planted(n, max(1, n // 6), 0.02, seed)
    atoms = build_atoms(inst, beta=beta, seed=seed)
    assert sorted(v for k in atoms.clusters for v in k) == list(range(n))
    assert dense_atom_violations(inst, atoms, beta) == []
    assert build_atoms(inst, beta=beta, seed=seed) == atoms


def test_build_atoms_rejects_bad_beta():
    with pytest.raises(ValidationError):
        build_atoms(Instance(3), beta=1.0)


def test_averaged_weights_examples():
    inst = Instance.from_edges(3, [(0, 2)])
    aw = averaged_weights(inst, Clustering(((0, 1), (2,))))
    assert aw.w[0, 2] == aw.w[2, 0] == pytest.approx(0.5)
    assert aw.w[0, 1] == 1 and aw.w[2, 2] == 1
    single = averaged_weights(inst, Clustering.singletons(3))
    np.testing.assert_array_equal(single.w, inst.adjacency + np.eye(3))
    whole = averaged_weights(inst, Clustering.one_cluster(3))
    assert np.all(whole.w == 1)


@given(st.integers(2, 12), st.floats(0, 1), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_averaged_weights_match_direct_average(n, p, seed):
    inst = generate_random(n, p, seed)
    atoms = Clustering.from_labels(np.random.default_rng(seed).integers(0, 3, n))
    aw = averaged_weights(inst, atoms)
    lab = atoms.labels()
    for u, v in itertools.product(range(n), repeat=2):
        ku, kv = atoms.clusters[lab[u]], atoms.clusters[lab[v]]
        expect = 1.0 if lab[u] == lab[v] else np.mean([inst.is_plus(a, b) for a in ku for b in kv])
        assert aw.w[u, v] == pytest.approx(expect)
    np.testing.assert_allclose(aw.totals, aw.w.sum(axis=1))


def test_admissible_examples():
    singles = Clustering.singletons(4)
    pre = build_admissible(Instance(4), singles, eps=0.6)
    assert pre.e_adm == frozenset()
    assert len(pre.e1) == 10  # complete, self pairs included
    k5 = build_admissible(_complete(5), Clustering.one_cluster(5), eps=0.3)
    assert k5.e_adm == frozenset()
    with pytest.raises(ValidationError):
        build_admissible(Instance(3), Clustering.singletons(3), eps=1.0)


def test_admissible_bridge_by_direct_evaluation():
    inst, cliques = _two_cliques()
    eps = 0.2
    pre = build_admissible(inst, cliques, eps)
    # oracle: every vertex has w_u = 8 and the only +mass across atoms is 1/64 per pair,
    # so the common-neighbor sum is 2 * 8 * (1/64) = 0.25 < eps * 16
    aw = averaged_weights(inst, cliques)
    assert np.allclose(aw.totals, 8 + 8 / 64)
    assert pre.e_adm == frozenset()
    # symmetric by construction
    for a, b in pre.e2:
        assert (min(a, b), max(a, b)) in pre.e2


def test_admissible_sets_are_symmetric_and_cross_atom():
    for seed in range(20):
        inst = generate_random(10, 0.5, seed)
        pre = precluster(inst, eps=0.25, seed=seed)
        lab = pre.atoms.labels()
        for u, v in pre.e_adm:
            assert u < v and lab[u] != lab[v]
        assert pre.e_adm <= pre.e_adm_raw
        # demotion: atom pairs are all-or-nothing
        for g, h in itertools.combinations(range(len(pre.atoms.clusters)), 2):
            cross = {(min(a, b), max(a, b)) for a in pre.atoms.clusters[g] for b in pre.atoms.clusters[h]}
            assert cross <= pre.e_adm or not (cross & pre.e_adm)


def test_audit_trivial_cases():
    k6 = _complete(6)
    rep = audit_preclustering(k6, precluster(k6, 0.25, start=Clustering.one_cluster(6)))
    assert rep.good_ratio == 1 and rep.num_admissible == 0
    assert rep.good_witness == Clustering.one_cluster(6)
    empty = Instance(6)
    rep = audit_preclustering(empty, precluster(empty, 0.25))
    assert rep.good_ratio == 1 and rep.good_cost == 0


def test_audit_matches_filtered_enumeration():
    # oracle: enumerate all partitions and keep the good ones
    for seed in range(6):
        inst = generate_random(7, 0.5, seed)
        pre = precluster(inst, 0.25, seed=seed)
        best = min(objective_clustering(inst, c) for c in map(Clustering.from_labels, restricted_growth_strings(7))
                   if is_good_clustering(c, pre.atoms, pre.e_adm))
        assert audit_preclustering(inst, pre).good_cost == best


def test_enforce_a1_postcondition():
    for seed in range(10):
        inst = generate_planted(12, 3, 0.1, seed)
        pre = precluster(inst, 0.2, beta=0.3, seed=seed)
        lab = pre.atoms.labels()
        merged = Clustering.from_labels(lab % 2)
        out = enforce_a1(merged, pre, eps1=0.5)
        for cl in out.clusters:
            for u in cl:
                k = pre.atoms.clusters[lab[u]]
                assert set(k) <= set(cl)
                assert len(cl) == len(k) or len(cl) > len(k) + 0.5 * len(pre.admissible_neighbors(u))
