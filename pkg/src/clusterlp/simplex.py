"""Dense revised simplex for small linear programs.

Problems are given as::

    min  c @ x   s.t.  A_eq @ x == b_eq,  A_ub @ x <= b_ub,  x >= 0

and converted to standard form by adding one slack per inequality row.
Phase 1 minimises the sum of artificials on rows that have no usable slack.
Pricing is Dantzig's rule; after a run of degenerate pivots it switches to
Bland's rule until the objective moves again, which rules out cycling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERATE_SWITCH = 50
REFACTOR_EVERY = 64


@dataclass
class LpProblem:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nvar = self.c.size
        for name in ("A_eq", "A_ub"):
            a = getattr(self, name)
            if a is None:
                a = np.zeros((0, nvar))
            a = np.asarray(a, dtype=float).reshape(-1, nvar)
            setattr(self, name, a)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float)
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float)
        if self.b_eq.size != self.A_eq.shape[0] or self.b_ub.size != self.A_ub.shape[0]:
            raise ValueError("right-hand side length does not match constraint rows")

    @property
    def num_vars(self) -> int:
        return self.c.size

    def violation(self, x: np.ndarray) -> float:
        v = [float(np.max(-x, initial=0.0))]
        if self.A_eq.shape[0]:
            v.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.A_ub.shape[0]:
            v.append(float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        return max(v)


@dataclass
class LpSolverReport:
    status: str
    objective: float = float("nan")
    dual_objective: float = float("nan")
    iterations: int = 0
    phase1_iterations: int = 0
    max_violation: float = float("nan")
    max_dual_violation: float = float("nan")
    bland_pivots: int = 0
    duals_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals_ub: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "iterations": self.iterations,
            "phase1_iterations": self.phase1_iterations,
            "max_violation": self.max_violation,
            "max_dual_violation": self.max_dual_violation,
            "bland_pivots": self.bland_pivots,
        }


class _Tableau:
    """Basis bookkeeping for the standard-form matrix ``A`` (rows x cols)."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int, stats: dict) -> str:
        m = self.A.shape[0]
        degenerate_run = 0
        use_bland = False
        for _ in range(max_iter):
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            candidates = np.flatnonzero(d < -OPT_TOL)
            if candidates.size == 0:
                return "optimal"
            if use_bland:
                q = int(candidates[0])
                stats["bland"] += 1
            else:
                q = int(candidates[np.argmin(d[candidates])])
            col = self.Binv @ self.A[:, q]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = np.maximum(self.xB[pos], 0.0) / col[pos]
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            # lowest basic index among ties (Bland); also used under Dantzig
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            if theta <= FEAS_TOL:
                degenerate_run += 1
                if degenerate_run >= DEGENERATE_SWITCH:
                    use_bland = True
            else:
                degenerate_run = 0
                use_bland = False
            self._pivot(r, q, col)
            stats["iterations"] += 1
        return "iteration_limit"

    def _pivot(self, r: int, q: int, col: np.ndarray):
        piv = col[r]
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()
            return
        # product-form update of B^-1 and the basic solution
        row = self.Binv[r] / piv
        self.Binv -= np.outer(col, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * col
        self.xB[r] = theta


def solve_lp(problem: LpProblem, max_iter: int = 50_000) -> tuple[np.ndarray, LpSolverReport]:
    """Solve ``problem``; raise :class:`SolverError` unless an optimum is certified."""
    A_eq, b_eq, A_ub, b_ub = problem.A_eq, problem.b_eq, problem.A_ub, problem.b_ub
    nvar = problem.num_vars
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub

    # standard form: [A_eq 0; A_ub I] [x; s] = [b_eq; b_ub]
    A = np.zeros((m, nvar + m_ub))
    A[:m_eq, :nvar] = A_eq
    A[m_eq:, :nvar] = A_ub
    A[m_eq:, nvar:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    ncols = A.shape[1]
    basis = []
    need_art = []
    for i in range(m):
        if i >= m_eq and sign[i] > 0:
            basis.append(nvar + (i - m_eq))
        else:
            need_art.append(i)
            basis.append(-1)
    n_art = len(need_art)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    for k, i in enumerate(need_art):
        A_full[i, ncols + k] = 1.0
        basis[i] = ncols + k
    total_cols = ncols + n_art

    stats = {"iterations": 0, "bland": 0}
    report = LpSolverReport(status="running")
    if m == 0:
        if np.any(problem.c < -OPT_TOL):
            report.status = "unbounded"
            raise SolverError("objective is unbounded below", report)
        x = np.zeros(nvar)
        report.status, report.objective, report.dual_objective = "optimal", 0.0, 0.0
        report.max_violation = report.max_dual_violation = 0.0
        return x, report

    tab = _Tableau(A_full, b, basis)
    allowed = np.ones(total_cols, dtype=bool)
    if n_art:
        cost1 = np.zeros(total_cols)
        cost1[ncols:] = 1.0
        status = tab.run(cost1, allowed, max_iter, stats)
        report.phase1_iterations = stats["iterations"]
        tab.refactor()
        infeas = float(np.sum(np.maximum(tab.xB, 0.0)[np.asarray(tab.basis) >= ncols]))
        if status != "optimal" or infeas > 1e-7:
            report.status = "infeasible"
            report.iterations = stats["iterations"]
            report.max_violation = infeas
            raise SolverError(f"phase 1 ended with infeasibility {infeas:.3e} ({status})", report)
        _drive_out_artificials(tab, ncols)
        allowed[ncols:] = False

    cost2 = np.zeros(total_cols)
    cost2[:nvar] = problem.c
    status = tab.run(cost2, allowed, max_iter, stats)
    tab.refactor()
    report.iterations = stats["iterations"]
    report.bland_pivots = stats["bland"]
    if status != "optimal":
        report.status = status
        raise SolverError(f"phase 2 ended with status {status}", report)

    xs = np.zeros(total_cols)
    xs[tab.basis] = tab.xB
    x = np.maximum(xs[:nvar], 0.0)
    x[np.abs(x) < 1e-13] = 0.0

    y = cost2[tab.basis] @ tab.Binv
    reduced = cost2[:ncols] - y @ A
    y_orig = y * sign
    report.duals_eq = y_orig[:m_eq]
    report.duals_ub = y_orig[m_eq:]
    report.objective = float(problem.c @ x)
    report.dual_objective = float(b @ y)
    report.max_violation = problem.violation(x)
    report.max_dual_violation = float(max(0.0, -reduced.min()))
    report.status = "optimal"
    if report.max_violation > 1e-7 or report.max_dual_violation > 1e-7 or report.duality_gap > 1e-7:
        report.status = "uncertified"
        raise SolverError(
            f"optimum not certified: primal violation {report.max_violation:.2e}, "
            f"dual violation {report.max_dual_violation:.2e}, gap {report.duality_gap:.2e}",
            report,
        )
    logger.debug("LP solved in %d iterations (%d Bland)", report.iterations, report.bland_pivots)
    return x, report


def _drive_out_artificials(tab: _Tableau, ncols: int) -> None:
    """Pivot zero-valued artificials out of the basis where a real column allows it."""
    for r in range(len(tab.basis)):
        if tab.basis[r] < ncols:
            continue
        row = tab.Binv[r] @ tab.A[:, :ncols]
        nonbasic = np.ones(ncols, dtype=bool)
        nonbasic[[j for j in tab.basis if j < ncols]] = False
        cand = np.flatnonzero(nonbasic & (np.abs(row) > 1e-9))
        if cand.size == 0:
            continue  # redundant row; the artificial stays basic at zero
        q = int(cand[0])
        col = tab.Binv @ tab.A[:, q]
        tab._pivot(r, q, col)
    tab.refactor()
