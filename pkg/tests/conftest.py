import numpy as np
import pytest

from clusterlp.gap import build_line_graph_instance, fractional_star_solution
from clusterlp.instance import Instance, generate_random
from clusterlp.lp import solve_cluster_lp_exact
from clusterlp.sdp import Discretization, assemble_matrices

BAD_TRIANGLE = Instance.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def bad_triangle():
    return BAD_TRIANGLE


@pytest.fixture(scope="session")
def gap5():
    lgi = build_line_graph_instance(5)
    return lgi, fractional_star_solution(lgi)


@pytest.fixture(scope="session")
def fractional_n8():
    """First n=8, p=0.5 random instance whose cluster-LP optimum is fractional."""
    for seed in range(1, 500):
        inst = generate_random(8, 0.5, seed)
        sol = solve_cluster_lp_exact(inst)
        x = sol.x_matrix()
        if np.any((x > 1e-6) & (x < 1 - 1e-6)):
            return inst, sol
    raise RuntimeError("no fractional instance found")


@pytest.fixture(scope="session")
def coarse_disc():
    return Discretization((0.0, 0.2, 0.4, 0.6, 0.8, 1.0))


@pytest.fixture(scope="session")
def coarse_model(coarse_disc):
    return assemble_matrices(coarse_disc)
