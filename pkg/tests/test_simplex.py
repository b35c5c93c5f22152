"""The in-house simplex against scipy's HiGHS as an independent oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from clusterlp.errors import SolverError
from clusterlp.simplex import LpProblem, solve_lp


def test_textbook_problem():
    # max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    x, rep = solve_lp(LpProblem([-3, -5], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18]))
    assert rep.objective == pytest.approx(-36)
    np.testing.assert_allclose(x, [2, 6], atol=1e-9)
    assert rep.duality_gap < 1e-9


def test_infeasible_and_unbounded():
    with pytest.raises(SolverError, match="infeasib"):
        solve_lp(LpProblem([1, 1], A_eq=[[1, 1]], b_eq=[1], A_ub=[[1, 1]], b_ub=[0.5]))
    with pytest.raises(SolverError, match="unbounded"):
        solve_lp(LpProblem([-1, 0], A_ub=[[0, 1]], b_ub=[1]))


def test_degenerate_problem_terminates():
    # Beale's cycling example, which loops forever under pure Dantzig pricing
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    x, rep = solve_lp(LpProblem(c, A_ub=A, b_ub=[0, 0, 1]))
    assert rep.objective == pytest.approx(-0.05)


@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 8), st.integers(0, 4))
@settings(max_examples=80, deadline=None)
def test_matches_highs(seed, n_eq, n_var, n_ub):
    rng = np.random.default_rng(seed)
    x0 = rng.random(n_var) * (rng.random(n_var) < 0.6)  # feasible point, often degenerate
    A_eq = rng.integers(-3, 4, (n_eq, n_var)).astype(float)
    A_ub = rng.integers(-3, 4, (n_ub, n_var)).astype(float)
    b_eq, b_ub = A_eq @ x0, A_ub @ x0 + rng.integers(0, 2, n_ub)
    c = rng.integers(0, 5, n_var).astype(float)  # c >= 0 keeps the problem bounded
    ref = linprog(c, A_ub=A_ub if n_ub else None, b_ub=b_ub if n_ub else None, A_eq=A_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    assert ref.status == 0
    x, rep = solve_lp(LpProblem(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub))
    assert rep.objective == pytest.approx(ref.fun, abs=1e-7)
    assert rep.max_violation <= 1e-7
    assert rep.duality_gap <= 1e-7
