import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlp.errors import EmptyCellError, ValidationError
from clusterlp.sdp import Discretization
from clusterlp.rounding import ALG3, ALG4, INDEPENDENT
from clusterlp.triangles import (ALL_PATTERNS, BudgetSpec, Cell, DegenerateProfile, TriangleProfile,
                                 budget_minus, budget_plus, compare_with_simulation, cost_and_delta,
                                 d_tilde, d_tilde_many, degenerate_cost_and_delta, random_feasible_profiles,
                                 verify_degenerate, verify_lemmas, verify_lemmas_156)

PERMS = list(itertools.permutations(range(3)))


def _brute_cost_delta(T, rules, budgets):
    """Enumerate the pivot step's joint outcomes directly from z and the rule set.

    Every join decision is a function of the sampled set S and independent coins,
    so summing over S and over coin outcomes gives the exact probabilities.
    """
    z = T.embedding_z()
    plus = [ch == "+" for ch in T.signs]
    edge_of = {frozenset(e): k for k, e in enumerate(((0, 1), (0, 2), (1, 2)))}
    y = T.y
    cost = delta = 0.0
    for u in range(3):
        a, b = [v for v in range(3) if v != u]
        ea, eb, eo = edge_of[frozenset((u, a))], edge_of[frozenset((u, b))], edge_of[frozenset((a, b))]
        dist = {}  # (join a, join b) -> probability
        for s, zs in z.items():
            if u not in s or zs == 0:
                continue
            opts = []
            for v, e in ((a, ea), (b, eb)):
                x = 1 - y[e]
                if plus[e]:
                    cls = int(rules.plus_class(x))
                    p = 1.0 if cls == 0 else (float(v in s) if cls == 1 else 1 - x)
                else:
                    p = 1 - x ** rules.minus_power
                opts.append(((True, p), (False, 1 - p)))
            for (ja, pa), (jb, pb) in itertools.product(*opts):
                dist[ja, jb] = dist.get((ja, jb), 0.0) + zs * pa * pb
        if plus[eo]:
            cost += dist.get((True, False), 0) + dist.get((False, True), 0)
        else:
            cost += dist.get((True, True), 0)
        hit = 1 - dist.get((False, False), 0)
        delta += hit * float(budgets.of(plus[eo], 1 - y[eo]))
    return cost, delta


def test_budget_examples():
    assert budget_plus(1.3, 0) == 0
    assert budget_minus(1.7, 1) == 0
    assert budget_plus(1.56, 0.4) == pytest.approx((1.56 / 0.22) * (0.16 / 1.4), rel=1e-12)
    assert budget_plus(1.56, 0.4) == pytest.approx(0.810390, abs=1e-6)
    with pytest.raises(ValidationError):
        budget_plus(1.56, 1.2)
    with pytest.raises(ValidationError):
        BudgetSpec(2.0)


def test_budget_bound_claim():
    x = np.arange(0.4, 1.0 + 1e-12, 1e-4)
    assert np.all(budget_plus(1.56, x) >= 2 * x)


def test_cost_delta_examples():
    short = TriangleProfile("+++", 0.9, 0.9, 0.9, 0.85)
    cost, delta = cost_and_delta(short, ALG3, BudgetSpec(1.56))
    assert cost == 0 and delta >= 0
    long = TriangleProfile("+++", 0.5, 0.5, 0.5, 0.25)
    cost, delta = cost_and_delta(long, ALG3, BudgetSpec(1.56))
    assert cost == pytest.approx(1.5)
    assert delta == pytest.approx(3 * budget_plus(1.56, 0.5) * 0.75)
    assert delta == pytest.approx(2.6591, abs=1e-4)


def test_infeasible_profile_rejected():
    with pytest.raises(ValidationError):
        cost_and_delta(TriangleProfile("+++", 0.5, 0.5, 0.5, 0.6), ALG3, BudgetSpec(1.56))


@pytest.mark.parametrize("rules,alpha", [(ALG3, 1.56), (ALG4, 1.485), (INDEPENDENT, 1.5)])
def test_closed_forms_match_exact_enumeration(rules, alpha):
    budgets = BudgetSpec(alpha)
    for T in random_feasible_profiles(150, np.random.default_rng(8)):
        got = cost_and_delta(T, rules, budgets)
        assert got == pytest.approx(_brute_cost_delta(T, rules, budgets), abs=1e-12)


@given(st.sampled_from(ALL_PATTERNS), st.sampled_from(PERMS), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_relabel_invariance(pattern, perm, seed):
    T = random_feasible_profiles(1, np.random.default_rng(seed), patterns=(pattern,))[0]
    for rules in (ALG3, ALG4):
        a = cost_and_delta(T, rules, BudgetSpec(1.5))
        b = cost_and_delta(T.relabel(perm), rules, BudgetSpec(1.5))
        assert a == pytest.approx(b, abs=1e-12)


def test_degenerate_substitution():
    for rules in (ALG3, ALG4):
        for sign in "+-":
            for y in (0.0, 0.3, 0.5, 0.6, 1.0):
                D = DegenerateProfile(sign, y)
                cost, delta = degenerate_cost_and_delta(D, rules, BudgetSpec(1.5))
                x = 1 - y
                if sign == "+":
                    p = 1.0 if x <= rules.tau1 else y
                    expect_cost, b = 2 * (1 - p), budget_plus(1.5, x)
                else:
                    p = 1 - x ** rules.minus_power
                    expect_cost, b = 2 * p, budget_minus(1.5, x)
                assert cost == pytest.approx(expect_cost, abs=1e-12)
                assert delta == pytest.approx(2 * b, abs=1e-12)
                assert D.substitute().is_feasible()


def test_verify_lemmas_at_156():
    rep = verify_lemmas_156(0.02)
    assert rep.passed(1e-9)
    assert set(k.split("/")[0] for k in rep.cases) >= {"+++", "++-", "+--", "---"}


def test_negative_control_at_140():
    rep = verify_lemmas(1.40, ALG3, 0.02)
    assert rep.min_value < -0.1
    case, (a, b, c, t) = rep.argmin
    T = TriangleProfile(case.split("/")[0], a, b, c, t)
    cost, delta = cost_and_delta(T, ALG3, BudgetSpec(1.40))
    assert delta - cost == pytest.approx(rep.min_value, abs=1e-9)
    assert _brute_cost_delta(T, ALG3, BudgetSpec(1.40)) == pytest.approx((cost, delta), abs=1e-12)


def test_degenerate_grid_at_four_thirds():
    assert verify_degenerate(4 / 3).passed(1e-9)
    assert not verify_degenerate(1.2).passed(1e-9)


def test_d_tilde_dominates_random_points():
    rng = np.random.default_rng(2)
    cells = Discretization((0.0, 0.2, 0.4, 0.43, 0.6, 0.8, 1.0)).cells()
    picked = [cells[k] for k in rng.choice(len(cells), 12, replace=False)]
    results = d_tilde_many(picked)
    checked = 0
    for cell, res in zip(picked, results):
        if res.empty:
            continue
        assert res.lower <= res.upper + 1e-12
        lo, hi = np.array(cell.lo), np.array(cell.hi)
        hits = 0
        for _ in range(20_000):
            y = np.sort(lo + (hi - lo) * rng.random(3))
            if not np.all((lo <= y) & (y <= hi)):
                continue
            t = cell.t_lo + (cell.t_hi - cell.t_lo) * rng.random()
            if not TriangleProfile("+++", *map(float, y), float(t)).is_feasible():
                continue
            for pattern in ALL_PATTERNS:
                cost, delta = cost_and_delta(TriangleProfile(pattern, *map(float, y), float(t)),
                                             ALG4, BudgetSpec(1.485))
                assert res.lower <= delta - cost + 1e-12
            hits += 1
            if hits == 100:
                break
        checked += hits
    assert checked >= 300


def test_d_tilde_all_short_cell():
    cell = Cell((0.9, 0.9, 0.9), (1.0, 1.0, 1.0), 0.8, 1.0)
    res = d_tilde(cell, ALG3, BudgetSpec(1.56), patterns=("+++",))
    assert res.lower >= 0


def test_d_tilde_empty_cell():
    # y_vw, y_uw >= 0.9 forces y_uv >= 0.8, so a box with y_uv <= 0.2 holds no triangle
    with pytest.raises(EmptyCellError):
        d_tilde(Cell((0.0, 0.9, 0.9), (0.2, 1.0, 1.0), 0.0, 0.2))


def test_simulation_oracle_agrees():
    # 12 profiles x 2 rule sets x 2 statistics; a 4-sigma band keeps the family-wise
    # false alarm rate near 0.3%
    profiles = random_feasible_profiles(12, np.random.default_rng(101))
    for i, T in enumerate(profiles):
        for rules, alpha in ((ALG3, 1.56), (ALG4, 1.485)):
            cmp = compare_with_simulation(T, rules, BudgetSpec(alpha), 100_000, 500 + i)
            assert cmp.within(4.0), (T, rules.name, cmp.cost_z, cmp.delta_z)
