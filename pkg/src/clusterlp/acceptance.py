"""Acceptance criteria A1-A9 as runnable checks.

Each runner returns a :class:`CriterionResult`.  ``level="full"`` uses the
stated parameters; ``level="smoke"`` shrinks trial counts and instance lists
so the whole set finishes in well under two minutes.  Tolerances are never
relaxed at the smoke level.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .exact import solve_exact
from .gap import (build_line_graph_instance, fractional_star_solution, fractional_value,
                  star_clustering, star_cost_count)
from .instance import generate_planted, generate_random, objective_clustering
from .lp import (check_covariance_psd, check_gram_psd, solve_cluster_lp_exact,
                 weaker_lemma_violation)
from .preclustering import audit_preclustering, build_admissible, build_atoms, dense_atom_violations
from .rounding import (ALG3, ALG4, DEPENDENT, best_of, estimate_edge_marginals,
                       pivot_inclusion_probabilities, pivot_joint_probabilities, simulate_pivot_step)
from .sdp import (DEFAULT_BREAKPOINTS, Discretization, assemble_matrices, c_vector,
                  census_matrices, corner_triangles, default_breakpoints, direct_matrices,
                  emit_sdpa, read_sdpa, sdpa_entries, triangle_census)
from .linalg import min_eigenvalue
from .triangles import (BudgetSpec, compare_with_simulation, random_feasible_profiles,
                        verify_degenerate, verify_lemmas)

logger = logging.getLogger(__name__)

LEVELS = ("smoke", "full")
CRITERIA = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9")
SMOKE_CRITERIA = ("A1", "A2", "A3", "A4", "A5")
GAP_N5_OPT = 15  # oracle optimum of the n=5 line-graph instance (one cluster)


@dataclass
class CriterionResult:
    cid: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{self.cid} {'PASS' if self.passed else 'FAIL'} ({self.seconds:.1f}s): {self.summary}"

    def to_json(self) -> dict:
        return {"id": self.cid, "passed": self.passed, "summary": self.summary,
                "seconds": round(self.seconds, 3), "details": self.details}


def _check_level(level: str) -> bool:
    if level not in LEVELS:
        raise ValidationError(f"level must be one of {LEVELS}, got {level!r}")
    return level == "full"


def _a1_solutions():
    sols = []
    for seed in range(1, 6):
        inst = generate_random(8, 0.5, seed)
        sols.append((f"random n=8 seed={seed}", inst, solve_cluster_lp_exact(inst)))
    lgi = build_line_graph_instance(5)
    sols.append(("line graph n=5 (half-integral)", lgi.instance, fractional_star_solution(lgi)))
    return sols


# -- A1 -------------------------------------------------------------------------

def criterion_a1(level: str = "full", seed: int = 11) -> CriterionResult:
    """Separation law of cluster-based rounding: Pr[separated] = 2x/(1+x) within 0.01."""
    _check_level(level)
    trials = 100_000
    rows = {}
    worst = 0.0
    for k, (name, inst, sol) in enumerate(_a1_solutions()):
        est = estimate_edge_marginals(sol, "cluster", trials, seed + k)["separation"]
        err = est.max_abs_error()
        worst = max(worst, err)
        rows[name] = {"max_abs_error": err, "max_z": est.max_z(),
                      "fractional_pairs": int(np.sum((sol.x_matrix() > 1e-9) & (sol.x_matrix() < 1 - 1e-9)) // 2)}
    ok = worst <= 0.01
    return CriterionResult("A1", ok, f"max |emp - 2x/(1+x)| = {worst:.4f} (tol 0.01, {trials} runs)",
                           {"trials": trials, "seed": seed, "instances": rows})


# -- A2 -------------------------------------------------------------------------

def criterion_a2(level: str = "full", seed: int = 12) -> CriterionResult:
    """Per-pivot inclusion and dependent joint inclusion under ALG3."""
    _check_level(level)
    trials = 100_000
    rng = np.random.default_rng(seed)
    worst_m, worst_j, joints = 0.0, 0.0, 0
    rows = {}
    for name, inst, sol in _a1_solutions():
        x = sol.x_matrix()
        m_err, j_err, n_j = 0.0, 0.0, 0
        for u in range(sol.n):
            joins = simulate_pivot_step(sol, ALG3, u, trials, rng, inst)
            p = pivot_inclusion_probabilities(sol, ALG3, u, inst)
            m_err = max(m_err, float(np.max(np.abs(joins.mean(axis=0) - p))))
            dep = inst.adjacency[u] & (ALG3.plus_class(x[u]) == DEPENDENT)
            idx = np.flatnonzero(dep)
            if idx.size >= 2:
                expected = pivot_joint_probabilities(sol, ALG3, u, inst)
                J = joins[:, idx].astype(float)
                emp = J.T @ J / trials
                off = ~np.eye(idx.size, dtype=bool)
                j_err = max(j_err, float(np.max(np.abs(emp - expected[np.ix_(idx, idx)])[off])))
                n_j += int(off.sum()) // 2
        rows[name] = {"marginal_max_error": m_err, "joint_max_error": j_err, "dependent_pairs_checked": n_j}
        worst_m, worst_j, joints = max(worst_m, m_err), max(worst_j, j_err), joints + n_j
    ok = worst_m <= 0.01 and worst_j <= 0.01 and joints > 0
    return CriterionResult(
        "A2", ok,
        f"marginal err {worst_m:.4f}, joint err {worst_j:.4f} over {joints} dependent pairs (tol 0.01)",
        {"trials": trials, "seed": seed, "instances": rows})


# -- A3 -------------------------------------------------------------------------

def criterion_a3(level: str = "full") -> CriterionResult:
    _check_level(level)
    main = verify_lemmas(1.56, ALG3, 0.02)
    deg = verify_degenerate(4.0 / 3.0, ALG3)
    neg = verify_lemmas(1.40, ALG3, 0.02)
    ok = main.passed() and deg.passed() and not neg.passed()
    return CriterionResult(
        "A3", ok,
        f"min(delta-cost) at 1.56 = {main.min_value:.3g}; degenerate at 4/3 = {deg.min_value:.3g}; "
        f"control at 1.40 = {neg.min_value:.3g} (must be < 0)",
        {"alpha_1.56": main.to_json(), "degenerate_4/3": deg.to_json(),
         "control_1.40": {"min": neg.min_value, "argmin": list(neg.argmin)}})


# -- A4 / A6 ----------------------------------------------------------------------

def a4_instances(level: str = "full"):
    count = 100 if _check_level(level) else 12
    probs = (0.3, 0.5, 0.7)
    for k in range(count):
        n = 7 + k % 4
        p = probs[(k // 4) % 3]
        yield k, n, p, generate_random(n, p, 4000 + k)


def criterion_a4(level: str = "full", seed: int = 14) -> CriterionResult:
    full = _check_level(level)
    trials = 200 if full else 50
    failures = []
    worst_excess = -np.inf
    ratios = []
    for k, n, p, inst in a4_instances(level):
        opt = solve_exact(inst).opt_value
        sol = solve_cluster_lp_exact(inst)
        res = best_of(sol, seed + k, trials, ALG3, inst)
        per_trial = res.per_trial_best
        mean = float(per_trial.mean())
        excess = mean - (1.56 * sol.lp_value + 0.5)
        worst_excess = max(worst_excess, excess)
        ratios.append(mean / opt if opt else 1.0)
        if sol.lp_value > opt + 1e-6:
            failures.append(f"instance {k}: lp {sol.lp_value} > opt {opt}")
        if excess > 0:
            failures.append(f"instance {k}: mean best-of {mean} > 1.56 lp + 0.5")
        if per_trial.min() < opt:
            failures.append(f"instance {k}: a rounding beat the optimum")
    ok = not failures
    return CriterionResult(
        "A4", ok,
        f"{len(ratios)} instances, worst mean - (1.56 lp + 0.5) = {worst_excess:.3f}, "
        f"mean best-of/opt = {np.mean(ratios):.4f}",
        {"trials": trials, "seed": seed, "failures": failures[:20], "max_ratio_to_opt": float(np.max(ratios))})


def criterion_a6(level: str = "full") -> CriterionResult:
    worst_lem, worst_cov, worst_gram = 0.0, np.inf, np.inf
    count = 0
    for _, _, _, inst in a4_instances(level):
        sol = solve_cluster_lp_exact(inst)
        worst_lem = max(worst_lem, weaker_lemma_violation(sol))
        worst_cov = min(worst_cov, min(check_covariance_psd(sol, u) for u in range(sol.n)))
        worst_gram = min(worst_gram, check_gram_psd(sol))
        count += 1
    ok = worst_lem <= 1e-7 and worst_cov >= -1e-7 and worst_gram >= -1e-7
    return CriterionResult(
        "A6", ok,
        f"{count} LP solutions: triple-bound violation {worst_lem:.2e}, min eig COV_u {worst_cov:.2e}, "
        f"min eig Gram {worst_gram:.2e}", {})


# -- A5 -------------------------------------------------------------------------

def criterion_a5(level: str = "full") -> CriterionResult:
    _check_level(level)
    bad = [n for n in range(3, 201) if Fraction(star_cost_count(n)) / fractional_value(n) != Fraction(4, 3)]
    # the star clustering's actual objective matches the counted value
    counted = [n for n in range(3, 16)
               if objective_clustering(build_line_graph_instance(n).instance,
                                       star_clustering(build_line_graph_instance(n), range(n))) != star_cost_count(n)]
    lgi = build_line_graph_instance(5)
    opt = solve_exact(lgi.instance, max_n=10).opt_value
    lp = solve_cluster_lp_exact(lgi.instance, max_n=10).lp_value
    ok = not bad and not counted and opt <= 20 and lp <= 15 + 1e-9
    return CriterionResult(
        "A5", ok,
        f"ratio 4/3 exact for n in [3, 200] ({len(bad)} mismatches); n=5: opt {opt} <= 20, lp {lp:g} <= 15",
        {"mismatches": bad, "count_mismatches": counted, "n5_opt": opt, "n5_lp": lp})


# -- A7 -------------------------------------------------------------------------

def _fractional_n8_instance(start_seed: int = 1):
    for seed in range(start_seed, start_seed + 500):
        inst = generate_random(8, 0.5, seed)
        sol = solve_cluster_lp_exact(inst)
        x = sol.x_matrix()
        if np.any((x > 1e-6) & (x < 1 - 1e-6)):
            return seed, inst, sol
    raise RuntimeError("no fractional n=8 LP solution found")


def criterion_a7(level: str = "full", seed: int = 17, out_dir=None) -> CriterionResult:
    import tempfile
    from pathlib import Path

    full = _check_level(level)
    disc = default_breakpoints()
    bp_ok = disc.breakpoints == DEFAULT_BREAKPOINTS and disc.t == 28
    rng = np.random.default_rng(seed)

    cells = disc.cells()
    worst_rec = 0.0
    for ci in rng.choice(len(cells), size=50, replace=False):
        cs = corner_triangles(cells[ci])
        lo = np.array([*cs.cell.lo, cs.cell.t_lo])
        hi = np.array([*cs.cell.hi, cs.cell.t_hi])
        T = lo + (hi - lo) * rng.random((1000, 4))
        lam = cs.weights(T)
        rec = lam @ c_vector(cs.corners)
        worst_rec = max(worst_rec, float(np.max(np.abs(rec - c_vector(T)))),
                        float(np.max(np.abs(lam.sum(axis=1) - 1))))

    n8_seed, inst, sol = _fractional_n8_instance()
    census = triangle_census(sol, inst)
    Qc, Fc = census_matrices(census, disc)
    Qd, Fd = direct_matrices(sol, disc)
    q_err = float(np.max(np.abs(Qc - Qd)))
    f_err = float(np.max(np.abs(Fc - Fd)))
    q_eig = min_eigenvalue(Qc)

    model_disc = disc if full else Discretization((0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
    model = assemble_matrices(model_disc)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(out_dir or tmp) / "model.dat-s"
        emit_sdpa(model, path)
        back = read_sdpa(path)
    round_trip = (back.entries == sdpa_entries(model) and np.array_equal(back.c, model.objective)
                  and back.m == model.num_vars)

    ok = bp_ok and worst_rec <= 1e-12 and q_err <= 1e-9 and q_eig >= -1e-7 and round_trip
    return CriterionResult(
        "A7", ok,
        f"28 intervals: {bp_ok}; reconstruction err {worst_rec:.1e}; census Q err {q_err:.1e} "
        f"(min eig {q_eig:.1e}); F err {f_err:.1e}; .dat-s round trip {round_trip} ({model.num_vars} vars)",
        {"n8_seed": n8_seed, "model_variables": model.num_vars, "model_cells": len(model.cells),
         "empty_cells": model.empty_cells, **model.meta})


# -- A8 -------------------------------------------------------------------------

def a8_instances(level: str = "full"):
    count = 200 if _check_level(level) else 30
    for k in range(count):
        n = 10 + (k * 7) % 31
        if k % 2 == 0:
            inst = generate_random(n, (0.2, 0.5, 0.8)[k % 3], 8000 + k)
        else:
            inst = generate_planted(n, 2 + k % 4, (0.0, 0.02, 0.05)[k % 3], 8000 + k)
        yield k, inst, (0.1, 0.3, 0.6)[(k // 2) % 3]


def criterion_a8(level: str = "full", eps: float = 0.2) -> CriterionResult:
    full = _check_level(level)
    problems = []
    atoms_seen = 0
    for k, inst, beta in a8_instances(level):
        atoms = build_atoms(inst, beta=beta, seed=k)
        atoms_seen += sum(1 for c in atoms.clusters if len(c) > 1)
        if dense_atom_violations(inst, atoms, beta):
            problems.append(f"instance {k}: dense-atom inequality fails")
        pre = build_admissible(inst, atoms, eps)
        if not (pre.e_adm <= pre.e2 <= pre.e1):
            problems.append(f"instance {k}: E_adm ⊆ E2 ⊆ E1 fails")
        lab = atoms.labels()
        if any(u == v or lab[u] == lab[v] for u, v in pre.e_adm):
            problems.append(f"instance {k}: self or atomic pair admissible")
    audits = []
    for k in range(20 if full else 5):
        n = 6 + k % 4
        inst = generate_planted(n, 2, 0.05, 9000 + k) if k % 2 else generate_random(n, 0.5, 9000 + k)
        pre = build_admissible(inst, build_atoms(inst, beta=0.3, seed=k), eps)
        rep = audit_preclustering(inst, pre)
        if rep.good_cost < rep.opt:
            problems.append(f"audit {k}: good clustering cheaper than opt")
        audits.append({"n": n, **{key: rep.to_json()[key] for key in ("opt", "good_cost", "good_ratio",
                                                                       "num_admissible", "admissible_ratio")}})
    ratios = [a["good_ratio"] for a in audits]
    return CriterionResult(
        "A8", not problems,
        f"{len(problems)} property failures; {atoms_seen} non-singleton atoms; audit good/opt ratios "
        f"mean {np.mean(ratios):.3f}, max {np.max(ratios):.3f} (reported)",
        {"problems": problems[:20], "audits": audits})


# -- A9 -------------------------------------------------------------------------

def criterion_a9(level: str = "full", seed: int = 19) -> CriterionResult:
    full = _check_level(level)
    trials = 1_000_000 if full else 100_000
    count = 50 if full else 10
    rng = np.random.default_rng(seed)
    profiles = random_feasible_profiles(count, rng)
    outside = []
    worst = 0.0
    for i, T in enumerate(profiles):
        for rules, alpha in ((ALG3, 1.56), (ALG4, 1.485)):
            cmp = compare_with_simulation(T, rules, BudgetSpec(alpha), trials, seed * 1000 + i)
            worst = max(worst, cmp.cost_z, cmp.delta_z)
            if not cmp.within(3.0):
                outside.append({"profile": i, "rules": rules.name, "cost_z": cmp.cost_z, "delta_z": cmp.delta_z})
    return CriterionResult(
        "A9", not outside,
        f"{count} profiles x 2 rule sets at {trials} trials: max |z| = {worst:.2f}, {len(outside)} outside 3 sigma",
        {"trials": trials, "seed": seed, "outside": outside})


RUNNERS = {
    "A1": criterion_a1, "A2": criterion_a2, "A3": criterion_a3, "A4": criterion_a4, "A5": criterion_a5,
    "A6": criterion_a6, "A7": criterion_a7, "A8": criterion_a8, "A9": criterion_a9,
}


def run_criterion(cid: str, level: str = "full") -> CriterionResult:
    if cid not in RUNNERS:
        raise ValidationError(f"unknown criterion {cid!r}")
    start = time.perf_counter()
    res = RUNNERS[cid](level)
    res.seconds = time.perf_counter() - start
    logger.info(res.line())
    return res


def run_acceptance(level: str = "smoke", ids=None) -> list[CriterionResult]:
    full = _check_level(level)
    ids = ids or (CRITERIA if full else SMOKE_CRITERIA)
    return [run_criterion(cid, level) for cid in ids]
