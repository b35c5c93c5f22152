import dataclasses

import numpy as np
import pytest

from clusterlp.errors import EmptyCellError, ValidationError
from clusterlp.lp import solve_cluster_lp_exact
from clusterlp.rounding import ALG4
from clusterlp.sdp import (DEFAULT_BREAKPOINTS, Discretization, c_vector, census_eta, census_matrices,
                           census_objective, corner_triangles, default_breakpoints, direct_matrices,
                           emit_sdpa, evaluate_eta, read_breakpoints, read_sdpa, triangle_census)
from clusterlp.instance import generate_random
from clusterlp.triangles import Cell


def test_default_breakpoints():
    disc = default_breakpoints()
    assert disc.t == 28
    assert np.all(np.diff(disc.breakpoints) > 0)
    assert 0.40 in disc.rights.tolist()
    assert disc.breakpoints[0] == 0 and disc.breakpoints[-1] == 1
    assert tuple(disc.breakpoints) == DEFAULT_BREAKPOINTS


def test_read_breakpoints(tmp_path):
    (tmp_path / "b.json").write_text("[0, 0.5, 1]")
    assert read_breakpoints(tmp_path / "b.json").t == 2
    (tmp_path / "bad.json").write_text("[0, 0.5, 0.4, 1]")
    with pytest.raises(ValidationError):
        read_breakpoints(tmp_path / "bad.json")


def test_interval_index():
    disc = Discretization((0.0, 0.25, 0.5, 1.0))
    assert disc.index([0.0, 0.25, 0.49, 0.5, 1.0]).tolist() == [0, 1, 1, 2, 2]


def test_corner_weights_unit_at_corner():
    cell = Cell((0.2, 0.3, 0.4), (0.3, 0.4, 0.5), 0.05, 0.2)
    cs = corner_triangles(cell)
    assert cs.corners.shape == (16, 4)
    for k, p in enumerate(cs.corners):
        lam = cs.weights(p)
        assert lam[k] == pytest.approx(1) and lam.sum() == pytest.approx(1)


def test_multilinear_reconstruction():
    rng = np.random.default_rng(0)
    disc = default_breakpoints()
    cells = disc.cells()
    worst = 0.0
    for ci in rng.choice(len(cells), 50, replace=False):
        cell = cells[ci]
        cs = corner_triangles(cell)
        lo = np.array([*cell.lo, cell.t_lo])
        hi = np.array([*cell.hi, cell.t_hi])
        T = lo + (hi - lo) * rng.random((1000, 4))
        lam = cs.weights(T)
        assert np.all(lam >= -1e-15)
        np.testing.assert_allclose(lam.sum(axis=1), 1, atol=1e-12)
        recon = lam @ c_vector(cs.corners)
        worst = max(worst, float(np.abs(recon - c_vector(T)).max()))
    assert worst <= 1e-12


def test_degenerate_dimension_collapses():
    cell = Cell((0.2, 0.3, 0.4), (0.3, 0.4, 0.5), 0.1, 0.1)
    cs = corner_triangles(cell)
    assert cs.corners.shape == (8, 4)
    assert cs.weights([0.25, 0.35, 0.45, 0.1]).sum() == pytest.approx(1)


def test_empty_cell_has_no_corners():
    with pytest.raises(EmptyCellError):
        corner_triangles(Cell((0, 0, 0), (1, 1, 1), 0.5, 0.4))


def test_model_shape(coarse_model, coarse_disc):
    m = coarse_model
    assert m.disc.t == coarse_disc.t == 5
    assert m.num_vars == len(m.var_index())
    assert np.all(np.isfinite(m.objective))


def _eta_at(model, point):
    eta = np.zeros(model.num_vars)
    eta[model.var_index()[tuple(float(v) for v in point)]] = 1.0
    return eta


def test_t3_gives_zero_q(coarse_model):
    Q, F = coarse_model.matrices(_eta_at(coarse_model, (1.0, 1.0, 1.0, 1.0)))
    assert np.all(Q == 0)
    last = coarse_model.disc.t - 1
    assert F[last, last] > 0
    assert F.sum() == F[last, last]


def test_uniform_eta(coarse_model):
    eta = np.full(coarse_model.num_vars, 1.0 / coarse_model.num_vars)
    Q, F = coarse_model.matrices(eta)
    assert np.abs(Q - Q.T).max() <= 1e-12
    ev = evaluate_eta(coarse_model, eta)
    assert ev.eta_sum == pytest.approx(1)
    assert ev.objective == pytest.approx(float(coarse_model.objective.mean()))


def test_single_triangle_placement():
    # (0.25, 0.25, 0.25, 0.25) sits in one interval; every placement lands on its diagonal
    disc = Discretization((0.0, 0.2, 0.3, 1.0))
    sol_pts = np.array([[0.25, 0.25, 0.25, 0.25]])
    from clusterlp.sdp import TriangleCensus
    census = TriangleCensus(3, sol_pts, ["+++"], np.array([0]), 0.0)
    Q, F = census_matrices(census, disc)
    expected = np.zeros((3, 3))
    expected[1, 1] = 6 * (0.25 - 0.0625)
    np.testing.assert_allclose(Q, expected, atol=1e-15)
    assert F[1, 1] == 6


def test_negative_eta_rejected(coarse_model):
    eta = np.full(coarse_model.num_vars, 1.0 / coarse_model.num_vars)
    eta[3] = -1e-3
    with pytest.raises(ValidationError):
        evaluate_eta(coarse_model, eta)
    with pytest.raises(ValidationError):
        evaluate_eta(coarse_model, eta[:-1])


def test_empty_model_cannot_be_emitted(coarse_model, tmp_path):
    empty = dataclasses.replace(coarse_model, var_point=np.zeros((0, 4)))
    with pytest.raises(ValidationError):
        emit_sdpa(empty, tmp_path / "e.dat-s")


def test_sdpa_round_trip(coarse_model, tmp_path):
    path = emit_sdpa(coarse_model, tmp_path / "m.dat-s")
    data = read_sdpa(path)
    assert data.m == coarse_model.num_vars
    assert len(data.block_struct) == 3
    np.testing.assert_array_equal(data.c, coarse_model.objective)
    eta = np.random.default_rng(1).random(data.m)
    eta /= eta.sum()
    Q, F = coarse_model.matrices(eta)
    np.testing.assert_allclose(data.block_matrix(eta, 1), Q, atol=1e-13)
    np.testing.assert_allclose(data.block_matrix(eta, 2), F, atol=1e-13)
    assert evaluate_eta(data, eta).objective == pytest.approx(evaluate_eta(coarse_model, eta).objective)
    lp = np.diag(data.block_matrix(eta, 3))
    assert lp[-2] == pytest.approx(0, abs=1e-12) and lp[-1] == pytest.approx(0, abs=1e-12)
    assert (tmp_path / "m.dat-s.json").exists()


def test_census_matches_direct_matrices(fractional_n8, coarse_disc):
    inst, sol = fractional_n8
    census = triangle_census(sol, inst)
    assert census.points.shape[0] == 56 + 28
    Qc, Fc = census_matrices(census, coarse_disc)
    Qd, Fd = direct_matrices(sol, coarse_disc)
    np.testing.assert_allclose(Qc, Qd, atol=1e-9)
    np.testing.assert_allclose(Fc, Fd, atol=1e-9)
    assert np.linalg.eigvalsh(Qc).min() >= -1e-7


def test_census_eta_on_integral_solution(coarse_model):
    for seed in range(1, 6):
        inst = generate_random(8, 0.5, seed)
        sol = solve_cluster_lp_exact(inst)
        x = sol.x_matrix()
        if np.any((x > 1e-9) & (x < 1 - 1e-9)):
            continue
        census = triangle_census(sol, inst)
        eta, missed = census_eta(coarse_model, census, strict=True)
        assert missed == 0
        assert eta.sum() == pytest.approx(1)
        ev = evaluate_eta(coarse_model, eta)
        # d-tilde is a lower bound (within its tolerance) on each triangle's delta - cost
        assert ev.objective <= census_objective(census, ALG4, coarse_model.alpha) + 1e-9
        assert ev.objective >= -coarse_model.meta["d_tilde_tol"]
        assert ev.min_eig_q >= -1e-7
