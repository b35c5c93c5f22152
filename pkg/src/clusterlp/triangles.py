"""Per-triangle cost and budget accounting for pivot rounding.

A triangle is described by its sign pattern on the edges (uv, uw, vw), the
pair statistics ``y_uv, y_uw, y_vw`` and the triple statistic ``y_uvw``.
For pivot ``p`` with the other two vertices ``a, b``::

    cost_p = Pr[ab incurs a cost | p],   delta_p = Pr[C ∩ {a, b} ≠ ∅ | p] · b_ab

and ``cost(T)``, ``delta(T)`` sum over the three pivots.  A degenerate
triangle is a single pair.

Everything here is vectorized: the evaluators accept arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import EmptyCellError, ValidationError
from .rounding import ALG3, ALG4, DEPENDENT, SHORT, RuleSet

FEAS_TOL = 1e-12

# pivot -> (incident edge a, incident edge b, opposite edge); edges 0=uv, 1=uw, 2=vw
PIVOT_EDGES = ((0, 1, 2), (0, 2, 1), (1, 2, 0))

CANONICAL_PATTERNS = ("+++", "++-", "+--", "---")
ALL_PATTERNS = tuple("".join(p) for p in product("+-", repeat=3))


# -- budgets ---------------------------------------------------------------

@dataclass(frozen=True)
class BudgetSpec:
    alpha: float

    def __post_init__(self):
        if not (1.0 <= self.alpha < 2.0):
            raise ValidationError(f"alpha must lie in [1, 2), got {self.alpha}")

    @property
    def c_alpha(self) -> float:
        return self.alpha / (1.0 - self.alpha / 2.0)

    def plus(self, x):
        x = np.asarray(x, dtype=float)
        return self.c_alpha * x * x / (1.0 + x)

    def minus(self, x):
        x = np.asarray(x, dtype=float)
        return self.c_alpha * (1.0 + 2.0 * x) * (1.0 - x) / (2.0 * (1.0 + x))

    def of(self, plus, x):
        return np.where(plus, self.plus(x), self.minus(x))


def _check_budget_args(alpha, x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValidationError("budget functions are defined on [0, 1]")
    return BudgetSpec(alpha), x


def budget_plus(alpha: float, x):
    budget, x = _check_budget_args(alpha, x)
    out = budget.plus(x)
    return float(out) if out.ndim == 0 else out


def budget_minus(alpha: float, x):
    budget, x = _check_budget_args(alpha, x)
    out = budget.minus(x)
    return float(out) if out.ndim == 0 else out


# -- profiles ----------------------------------------------------------------

def _signs(pattern: str) -> np.ndarray:
    if len(pattern) != 3 or set(pattern) - {"+", "-"}:
        raise ValidationError(f"sign pattern must be three of '+'/'-', got {pattern!r}")
    return np.array([ch == "+" for ch in pattern])


@dataclass(frozen=True)
class TriangleProfile:
    """Signs on (uv, uw, vw) plus ``y_uv, y_uw, y_vw, y_uvw``."""

    signs: str
    y_uv: float
    y_uw: float
    y_vw: float
    y_uvw: float

    def __post_init__(self):
        _signs(self.signs)

    @property
    def y(self) -> np.ndarray:
        return np.array([self.y_uv, self.y_uw, self.y_vw])

    def violations(self, tol: float = FEAS_TOL, strong: bool = False) -> list[str]:
        return _violations(self.y, self.y_uvw, tol, strong)

    def is_feasible(self, tol: float = FEAS_TOL, strong: bool = False) -> bool:
        return not self.violations(tol, strong)

    def relabel(self, perm: tuple[int, int, int]) -> "TriangleProfile":
        """The same triangle with vertices (u, v, w) renamed to positions ``perm``."""
        names = ("u", "v", "w")
        edge_index = {frozenset("uv"): 0, frozenset("uw"): 1, frozenset("vw"): 2}
        new = {old: names[p] for old, p in zip(names, perm)}
        sig, y = [None] * 3, [None] * 3
        for (a, b), k in zip(("uv", "uw", "vw"), range(3)):
            j = edge_index[frozenset(new[a] + new[b])]
            sig[j], y[j] = self.signs[k], self.y[k]
        return TriangleProfile("".join(sig), y[0], y[1], y[2], self.y_uvw)

    def embedding_z(self) -> dict[frozenset, float]:
        """A three-vertex cluster-LP solution with these statistics (u, v, w = 0, 1, 2)."""
        a, b, c, t = self.y_uv, self.y_uw, self.y_vw, self.y_uvw
        z = {
            frozenset({0, 1, 2}): t,
            frozenset({0, 1}): a - t,
            frozenset({0, 2}): b - t,
            frozenset({1, 2}): c - t,
            frozenset({0}): 1 - a - b + t,
            frozenset({1}): 1 - a - c + t,
            frozenset({2}): 1 - b - c + t,
        }
        if min(z.values()) < -1e-12:
            raise ValidationError("profile has no three-vertex embedding")
        return {s: max(0.0, v) for s, v in z.items()}


@dataclass(frozen=True)
class DegenerateProfile:
    sign: str
    y: float

    def __post_init__(self):
        if self.sign not in ("+", "-"):
            raise ValidationError("degenerate sign must be '+' or '-'")
        if not (0.0 <= self.y <= 1.0):
            raise ValidationError("y must lie in [0, 1]")

    def substitute(self) -> TriangleProfile:
        """The stand-in triangle (y, y, 1, y): +++ for a +pair, --+ for a -pair."""
        signs = "+++" if self.sign == "+" else "--+"
        return TriangleProfile(signs, self.y, self.y, 1.0, self.y)


def _violations(y, t, tol, strong=False) -> list[str]:
    a, b, c = (float(v) for v in y)
    t = float(t)
    out = []
    if min(a, b, c, t) < -tol or max(a, b, c, t) > 1 + tol:
        out.append("values outside [0, 1]")
    for p, q, r in ((a, b, c), (a, c, b), (b, c, a)):
        # x_r <= x_p + x_q  <=>  p + q - r <= 1
        if p + q - r > 1 + tol:
            out.append("triangle inequality on x")
            break
    if t > min(a, b, c) + tol:
        out.append("y_uvw exceeds a pair value")
    if max(a + b, a + c, b + c) - t > 1 + tol:
        out.append("pair union exceeds 1")
    s = a + b + c
    if 3 * t > s + tol or s > 1.5 + 1.5 * t + tol:
        out.append("3 y_uvw <= sum <= 3/2 + 3/2 y_uvw")
    if strong:
        for p, q in ((a, b), (a, c), (b, c)):
            if (t - p * q) ** 2 > p * (1 - p) * q * (1 - q) + tol:
                out.append("pivot covariance block not PSD")
                break
    return out


def feasible_mask(y: np.ndarray, t: np.ndarray, tol: float = FEAS_TOL) -> np.ndarray:
    """Vectorized feasibility of (..., 3) pair values and (...) triple values."""
    a, b, c = y[..., 0], y[..., 1], y[..., 2]
    s = a + b + c
    ok = (np.minimum(np.minimum(a, b), np.minimum(c, t)) >= -tol)
    ok &= np.maximum(np.maximum(a, b), np.maximum(c, t)) <= 1 + tol
    ok &= (a + b - c <= 1 + tol) & (a + c - b <= 1 + tol) & (b + c - a <= 1 + tol)
    ok &= t <= np.minimum(np.minimum(a, b), c) + tol
    ok &= np.maximum(np.maximum(a + b, a + c), b + c) - t <= 1 + tol
    ok &= (3 * t <= s + tol) & (s <= 1.5 + 1.5 * t + tol)
    return ok


# -- closed forms --------------------------------------------------------------

def classify(plus, y, rules: RuleSet):
    """Class code per edge: SHORT/DEPENDENT/INDEPENDENT_PLUS for +edges, -1 for -edges."""
    cls = rules.plus_class(1.0 - np.asarray(y, dtype=float))
    return np.where(plus, cls, -1)


def _marginal(plus, cls, y, rules: RuleSet):
    p_plus = np.where(cls == SHORT, 1.0, y)  # dependent: y; independent: 1 - x = y
    p_minus = 1.0 - (1.0 - y) ** rules.minus_power
    return np.where(plus, p_plus, p_minus)


def pivot_terms(plus, cls, y, t, rules: RuleSet, budget: BudgetSpec):
    """Per-pivot (cost_p, Pr[C meets the opposite pair], budget of the opposite edge).

    Each returned array has a trailing axis of 3 in pivot order (u, v, w).
    ``plus`` and ``cls`` have a trailing axis of 3 (edges uv, uw, vw) and may be
    broadcast against ``y`` (..., 3) and ``t`` (...).
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    plus = np.broadcast_to(plus, y.shape)
    cls = np.broadcast_to(cls, y.shape)
    p = _marginal(plus, cls, y, rules)
    dep = plus & (cls == DEPENDENT)
    bud = budget.of(plus, 1.0 - y)
    costs, hits, budgets = [], [], []
    for ea, eb, eo in PIVOT_EDGES:
        pa, pb = p[..., ea], p[..., eb]
        pj = np.where(dep[..., ea] & dep[..., eb], t, pa * pb)
        costs.append(np.where(plus[..., eo], pa + pb - 2 * pj, pj))
        hits.append(pa + pb - pj)
        budgets.append(np.broadcast_to(bud[..., eo], pj.shape))
    return np.stack(costs, -1), np.stack(hits, -1), np.stack(budgets, -1)


def evaluate(plus, cls, y, t, rules: RuleSet, budget: BudgetSpec):
    """(cost, delta) arrays for triangles with forced edge classes."""
    cost, hit, bud = pivot_terms(plus, cls, y, t, rules, budget)
    return cost.sum(-1), (hit * bud).sum(-1)


def cost_and_delta(T, rules: RuleSet, budgets: BudgetSpec, check: bool = True) -> tuple[float, float]:
    if isinstance(T, DegenerateProfile):
        return degenerate_cost_and_delta(T, rules, budgets)
    if check and not T.is_feasible(tol=1e-9):
        raise ValidationError(f"infeasible triangle profile: {', '.join(T.violations(1e-9))}")
    plus = _signs(T.signs)
    y = T.y
    cost, delta = evaluate(plus, classify(plus, y, rules), y, np.float64(T.y_uvw), rules, budgets)
    return float(cost), float(delta)


def degenerate_cost_and_delta(D: DegenerateProfile, rules: RuleSet, budgets: BudgetSpec):
    plus = D.sign == "+"
    y = np.array(D.y)
    p = float(_marginal(plus, classify(plus, y, rules), y, rules))
    b = float(budgets.of(plus, 1.0 - D.y))
    # each endpoint pivots once; the pivot is always in its cluster
    cost = 2 * (1 - p) if plus else 2 * p
    return cost, 2 * b


def degenerate_grid_arrays(sign_plus: bool, y: np.ndarray, rules: RuleSet, budgets: BudgetSpec):
    p = _marginal(sign_plus, classify(sign_plus, y, rules), y, rules)
    cost = 2 * (1 - p) if sign_plus else 2 * p
    return cost, 2 * budgets.of(sign_plus, 1.0 - y)


# -- grid verification -----------------------------------------------------------

@dataclass
class CaseResult:
    min_value: float
    argmin: tuple
    points: int

    def to_json(self) -> dict:
        return {"min": self.min_value, "argmin": list(self.argmin), "points": self.points}


@dataclass
class VerifyReport:
    alpha: float
    rules: str
    step: float
    cases: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)
    substitution_max_increase: float = float("-inf")

    @property
    def min_value(self) -> float:
        vals = [c.min_value for c in self.cases.values()] + [c.min_value for c in self.degenerate.values()]
        return min(vals)

    @property
    def argmin(self):
        allc = list(self.cases.items()) + list(self.degenerate.items())
        key, res = min(allc, key=lambda kv: kv[1].min_value)
        return key, res.argmin

    def passed(self, tol: float = 1e-9) -> bool:
        return self.min_value >= -tol

    def to_json(self) -> dict:
        key, arg = self.argmin
        return {
            "alpha": self.alpha,
            "rules": self.rules,
            "step": self.step,
            "min": self.min_value,
            "argmin": {"case": key, "point": list(arg)},
            "cells": {k: v.to_json() for k, v in self.cases.items()},
            "degenerate": {k: v.to_json() for k, v in self.degenerate.items()},
            "substitution_max_increase": self.substitution_max_increase,
        }


def _grid(step: float) -> np.ndarray:
    k = int(round(1.0 / step))
    if not np.isclose(k * step, 1.0):
        raise ValidationError("grid step must divide 1")
    return np.linspace(0.0, 1.0, k + 1)


def feasible_grid(step: float, chunk_rows: int = 2000):
    """Yield (y (m, 3), t (m,)) feasible grid points in chunks.

    Pair values range over the full cube; for each, y_uvw runs over grid
    values inside its feasible interval plus both interval endpoints.
    """
    g = _grid(step)
    A, B, C = np.meshgrid(g, g, g, indexing="ij")
    y3 = np.stack([A.ravel(), B.ravel(), C.ravel()], axis=1)
    a, b, c = y3.T
    s = a + b + c
    lo = np.maximum.reduce([np.zeros_like(a), a + b - 1, a + c - 1, b + c - 1, (2 * s - 3) / 3])
    hi = np.minimum.reduce([a, b, c, s / 3])
    tri = (a + b - c <= 1 + FEAS_TOL) & (a + c - b <= 1 + FEAS_TOL) & (b + c - a <= 1 + FEAS_TOL)
    keep = tri & (lo <= hi + FEAS_TOL)
    y3, lo, hi = y3[keep], lo[keep], np.maximum(hi[keep], lo[keep])
    for start in range(0, len(y3), chunk_rows):
        ys, ls, hs = y3[start:start + chunk_rows], lo[start:start + chunk_rows], hi[start:start + chunk_rows]
        cand = np.concatenate([np.broadcast_to(g, (len(ys), g.size)), ls[:, None], hs[:, None]], axis=1)
        ok = (cand >= ls[:, None] - FEAS_TOL) & (cand <= hs[:, None] + FEAS_TOL)
        rows, cols = np.nonzero(ok)
        t = np.clip(cand[rows, cols], ls[rows], hs[rows])
        yield ys[rows], t


def verify_lemmas(alpha: float = 1.56, rules: RuleSet = ALG3, step: float = 0.02,
                  patterns=CANONICAL_PATTERNS, degenerate_alpha: float | None = None) -> VerifyReport:
    """Minimum of delta - cost over a feasible grid, per (pattern, #short +edges) case."""
    budgets = BudgetSpec(alpha)
    report = VerifyReport(alpha, rules.name, step)
    for pattern in patterns:
        plus = _signs(pattern)
        for y, t in feasible_grid(step):
            cls = classify(plus, y, rules)
            cost, delta = evaluate(plus, cls, y, t, rules, budgets)
            d = delta - cost
            n_short = (cls == SHORT).sum(axis=1)
            for ns in np.unique(n_short):
                sel = np.flatnonzero(n_short == ns)
                k = sel[np.argmin(d[sel])]
                key = f"{pattern}/short={ns}"
                prev = report.cases.get(key)
                if prev is None or d[k] < prev.min_value:
                    report.cases[key] = CaseResult(float(d[k]), (*map(float, y[k]), float(t[k])),
                                                   (prev.points if prev else 0) + sel.size)
                else:
                    prev.points += sel.size
    deg = verify_degenerate(degenerate_alpha or alpha, rules, step / 20)
    report.degenerate = deg.degenerate
    report.substitution_max_increase = deg.substitution_max_increase
    return report


def verify_lemmas_156(grid_step: float = 0.02) -> VerifyReport:
    return verify_lemmas(1.56, ALG3, grid_step)


def verify_degenerate(alpha: float, rules: RuleSet = ALG3, step: float = 0.001) -> VerifyReport:
    """Degenerate pairs on a y grid, directly and through the (y, y, 1, y) stand-in."""
    budgets = BudgetSpec(alpha)
    report = VerifyReport(alpha, rules.name, step)
    y = _grid(step)
    worst = float("-inf")
    for sign in ("+", "-"):
        plus = sign == "+"
        cost, delta = degenerate_grid_arrays(plus, y, rules, budgets)
        d = delta - cost
        k = int(np.argmin(d))
        report.degenerate[f"degenerate{sign}"] = CaseResult(float(d[k]), (float(y[k]),), y.size)
        sub_plus = _signs("+++" if plus else "--+")
        y3 = np.stack([y, y, np.ones_like(y)], axis=1)
        sc, sd = evaluate(sub_plus, classify(sub_plus, y3, rules), y3, y, rules, budgets)
        worst = max(worst, float(np.max((sd - sc) - d)))
    report.substitution_max_increase = worst
    return report


# -- interval bounds for d-tilde -----------------------------------------------------

def _imul(alo, ahi, blo, bhi):
    c = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return c.min(axis=0), c.max(axis=0)


def _interval_marginal(plus, cls, lo, hi, rules: RuleSet):
    mlo = np.where(plus, np.where(cls == SHORT, 1.0, lo), 1.0 - (1.0 - lo) ** rules.minus_power)
    mhi = np.where(plus, np.where(cls == SHORT, 1.0, hi), 1.0 - (1.0 - hi) ** rules.minus_power)
    return mlo, mhi


def _interval_budget(plus, lo, hi, budget: BudgetSpec):
    # budget+ grows with x = 1 - y; budget- shrinks with x
    blo = np.where(plus, budget.plus(1.0 - hi), budget.minus(1.0 - lo))
    bhi = np.where(plus, budget.plus(1.0 - lo), budget.minus(1.0 - hi))
    return blo, bhi


def interval_lower_bound(plus, cls, lo, hi, tlo, thi, rules: RuleSet, budget: BudgetSpec) -> np.ndarray:
    """Lower bound of delta - cost over boxes [lo, hi] x [tlo, thi] with forced classes."""
    mlo, mhi = _interval_marginal(plus, cls, lo, hi, rules)
    blo, bhi = _interval_budget(plus, lo, hi, budget)
    dep = plus & (cls == DEPENDENT)
    total = np.zeros(lo.shape[:-1])
    for ea, eb, eo in PIVOT_EDGES:
        both = dep[..., ea] & dep[..., eb]
        alo, ahi = mlo[..., ea], mhi[..., ea]
        clo, chi = mlo[..., eb], mhi[..., eb]
        # joint inclusion J and the "only a" / "only b" masses
        jlo = np.where(both, tlo, alo * clo)
        jhi = np.where(both, np.minimum(thi, np.minimum(ahi, chi)), ahi * chi)
        oa_lo = np.where(both, np.maximum(alo - thi, 0.0), alo * (1 - chi))
        oa_hi = np.where(both, ahi - tlo, ahi * (1 - clo))
        ob_lo = np.where(both, np.maximum(clo - thi, 0.0), clo * (1 - ahi))
        ob_hi = np.where(both, chi - tlo, chi * (1 - alo))
        olo, ohi = oa_lo + ob_lo, oa_hi + ob_hi
        Blo, Bhi = blo[..., eo], bhi[..., eo]
        plus_o = plus[..., eo]
        # +opposite: (only)(B - 1) + J·B ; -opposite: (only)·B + J·(B - 1)
        f1lo, _ = _imul(olo, ohi, np.where(plus_o, Blo - 1, Blo), np.where(plus_o, Bhi - 1, Bhi))
        f2lo, _ = _imul(jlo, jhi, np.where(plus_o, Blo, Blo - 1), np.where(plus_o, Bhi, Bhi - 1))
        # same quantity via marginals: (pa + pb)(B - 1) + J(2 - B)  or  (pa + pb)B - J(1 + B)
        slo, shi = alo + clo, ahi + chi
        g1lo, _ = _imul(slo, shi, np.where(plus_o, Blo - 1, Blo), np.where(plus_o, Bhi - 1, Bhi))
        g2lo, _ = _imul(jlo, jhi, np.where(plus_o, 2 - Bhi, -1 - Bhi), np.where(plus_o, 2 - Blo, -1 - Blo))
        total = total + np.maximum(f1lo + f2lo, g1lo + g2lo)
    return total


def box_infeasible(lo, hi, tlo, thi, ordered: bool = True, tol: float = 1e-12) -> np.ndarray:
    """True where no point of the box can be a feasible (ordered) triangle."""
    a_lo, b_lo, c_lo = lo[..., 0], lo[..., 1], lo[..., 2]
    a_hi, b_hi, c_hi = hi[..., 0], hi[..., 1], hi[..., 2]
    bad = (b_lo + c_lo - a_hi > 1 + tol) | (a_lo + c_lo - b_hi > 1 + tol) | (a_lo + b_lo - c_hi > 1 + tol)
    bad |= tlo > np.minimum(np.minimum(a_hi, b_hi), c_hi) + tol
    bad |= np.maximum(np.maximum(a_lo + b_lo, a_lo + c_lo), b_lo + c_lo) - thi > 1 + tol
    bad |= 3 * tlo > a_hi + b_hi + c_hi + tol
    bad |= a_lo + b_lo + c_lo > 1.5 + 1.5 * thi + tol
    if ordered:
        bad |= (a_lo > b_hi + tol) | (b_lo > c_hi + tol)
    return bad


def _ordered_feasible(y, t, tol=FEAS_TOL):
    return feasible_mask(y, t, tol) & (y[..., 0] <= y[..., 1] + tol) & (y[..., 1] <= y[..., 2] + tol)


@dataclass(frozen=True)
class Cell:
    """Box of ordered triangles: y_uv in I_i, y_uw in I_j, y_vw in I_k, y_uvw in [t_lo, t_hi]."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    t_lo: float
    t_hi: float
    key: tuple = ()


@dataclass
class DTildeResult:
    lower: float  # certified lower bound of min(delta - cost) over the cell
    upper: float  # best value found at a feasible point
    argmin: tuple | None
    empty: bool

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def class_pieces(lo: float, hi: float, rules: RuleSet) -> list[tuple[float, float, int]]:
    """Split [lo, hi] at the y thresholds; each piece carries the +edge class of its interior."""
    cuts = sorted({v for v in (1.0 - rules.tau1, 1.0 - rules.tau2) if lo < v < hi})
    edges = [lo, *cuts, hi]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = np.array((a + b) / 2 if b > a else a)
        out.append((a, b, int(rules.plus_class(1.0 - mid))))
    return out


def d_tilde_many(cells: list[Cell], rules: RuleSet = ALG4, budgets: BudgetSpec = BudgetSpec(1.485),
                 patterns=ALL_PATTERNS, tol: float = 2e-3, max_rounds: int = 40,
                 max_boxes: int = 400_000, grid_points: int = 4, batch: int = 64) -> list[DTildeResult]:
    """Certified lower bounds of min(delta - cost) over each cell, all sign patterns.

    Interval branch-and-bound: boxes are split at the class thresholds, pruned
    when provably infeasible, and bisected while their interval lower bound
    is more than ``tol`` below the best feasible value seen in their cell.
    The returned ``lower`` is the minimum interval bound over all leaves.
    """
    if len(cells) > batch:
        out = []
        for start in range(0, len(cells), batch):
            out.extend(d_tilde_many(cells[start:start + batch], rules, budgets, patterns, tol,
                                    max_rounds, max_boxes, grid_points, batch))
        return out
    ncell = len(cells)
    if ncell == 0:
        return []
    pat_plus = np.array([_signs(p) for p in patterns])
    npat = len(patterns)

    # initial boxes: cell x threshold pieces x pattern
    lo_l, hi_l, cls_l, cell_l, pat_l = [], [], [], [], []
    for ci, cell in enumerate(cells):
        pieces = [class_pieces(cell.lo[d], cell.hi[d], rules) for d in range(3)]
        for pa, pb, pc in product(*pieces):
            for pi in range(npat):
                lo_l.append((pa[0], pb[0], pc[0], cell.t_lo))
                hi_l.append((pa[1], pb[1], pc[1], cell.t_hi))
                cls_l.append((pa[2], pb[2], pc[2]))
                cell_l.append(ci)
                pat_l.append(pi)
    lo = np.array(lo_l)
    hi = np.array(hi_l)
    cls = np.array(cls_l)
    cell_id = np.array(cell_l)
    pat = np.array(pat_l)

    upper = np.full(ncell, np.inf)
    arg = np.full((ncell, 5), np.nan)
    _seed_upper(cells, rules, budgets, pat_plus, upper, arg, grid_points)

    settled = np.full(ncell, np.inf)  # min lower bound over leaves retired by the bound test
    for _ in range(max_rounds):
        if lo.shape[0] == 0:
            break
        plus = pat_plus[pat]
        infeasible = box_infeasible(lo[:, :3], hi[:, :3], lo[:, 3], hi[:, 3])
        lb = interval_lower_bound(plus, cls, lo[:, :3], hi[:, :3], lo[:, 3], hi[:, 3], rules, budgets)
        # midpoint probes tighten the upper bounds
        mid = (lo + hi) / 2
        ok = ~infeasible & _ordered_feasible(mid[:, :3], mid[:, 3])
        if ok.any():
            true_cls = classify(plus[ok], mid[ok, :3], rules)
            c, d = evaluate(plus[ok], true_cls, mid[ok, :3], mid[ok, 3], rules, budgets)
            _update_upper(upper, arg, cell_id[ok], d - c, mid[ok], pat[ok])
        live = ~infeasible
        retire = live & (lb >= upper[cell_id] - tol)
        np.minimum.at(settled, cell_id[retire], lb[retire])
        keep = live & ~retire
        lo, hi, cls, cell_id, pat, lb = lo[keep], hi[keep], cls[keep], cell_id[keep], pat[keep], lb[keep]
        if lo.shape[0] == 0 or 2 * lo.shape[0] > max_boxes:
            break
        # bisect the widest coordinate
        width = hi - lo
        dim = np.argmax(width, axis=1)
        rows = np.arange(lo.shape[0])
        cut = (lo[rows, dim] + hi[rows, dim]) / 2
        lo2, hi2 = lo.copy(), hi.copy()
        hi[rows, dim] = cut
        lo2[rows, dim] = cut
        lo = np.concatenate([lo, lo2])
        hi = np.concatenate([hi, hi2])
        cls = np.concatenate([cls, cls])
        cell_id = np.concatenate([cell_id, cell_id])
        pat = np.concatenate([pat, pat])
    # leaves still open contribute their interval bound
    if lo.shape[0]:
        plus = pat_plus[pat]
        infeasible = box_infeasible(lo[:, :3], hi[:, :3], lo[:, 3], hi[:, 3])
        lb = interval_lower_bound(plus, cls, lo[:, :3], hi[:, :3], lo[:, 3], hi[:, 3], rules, budgets)
        np.minimum.at(settled, cell_id[~infeasible], lb[~infeasible])

    out = []
    for ci in range(ncell):
        lower = min(settled[ci], upper[ci])
        empty = not np.isfinite(lower)
        argmin = None if np.isnan(arg[ci, 0]) else (tuple(float(v) for v in arg[ci, :4]), patterns[int(arg[ci, 4])])
        out.append(DTildeResult(float(lower), float(upper[ci]), argmin, empty))
    return out


def _update_upper(upper, arg, cell_id, values, points, pats):
    order = np.lexsort((values, cell_id))
    cid, vals = cell_id[order], values[order]
    first = np.r_[True, cid[1:] != cid[:-1]]
    for k in np.flatnonzero(first):
        c = cid[k]
        if vals[k] < upper[c]:
            upper[c] = vals[k]
            arg[c, :4] = points[order[k]]
            arg[c, 4] = pats[order[k]]


def _seed_upper(cells, rules, budgets, pat_plus, upper, arg, k):
    """Evaluate a k^4 grid (feasible points only) in every cell, all patterns."""
    g = np.linspace(0.0, 1.0, k)
    G = np.stack(np.meshgrid(g, g, g, g, indexing="ij"), axis=-1).reshape(-1, 4)
    lo = np.array([(*c.lo, c.t_lo) for c in cells])
    hi = np.array([(*c.hi, c.t_hi) for c in cells])
    pts = lo[:, None, :] + (hi - lo)[:, None, :] * G[None, :, :]  # (cells, k^4, 4)
    ok = _ordered_feasible(pts[..., :3], pts[..., 3])
    ci, gi = np.nonzero(ok)
    if ci.size == 0:
        return
    y, t = pts[ci, gi, :3], pts[ci, gi, 3]
    for p, plus in enumerate(pat_plus):
        c, d = evaluate(plus, classify(plus, y, rules), y, t, rules, budgets)
        _update_upper(upper, arg, ci, d - c, pts[ci, gi], np.full(ci.size, p))


def d_tilde(cell, rules: RuleSet = ALG4, budgets: BudgetSpec = BudgetSpec(1.485), **kw) -> DTildeResult:
    """Lower bound of delta - cost over one cell; raises EmptyCellError if it has no triangle."""
    if not isinstance(cell, Cell):
        (ilo, ihi), (jlo, jhi), (klo, khi), (tlo, thi) = cell
        cell = Cell((ilo, jlo, klo), (ihi, jhi, khi), tlo, thi)
    res = d_tilde_many([cell], rules, budgets, **kw)[0]
    if res.empty:
        raise EmptyCellError("cell contains no feasible ordered triangle")
    return res


def random_feasible_profiles(count: int, rng: np.random.Generator, patterns=ALL_PATTERNS) -> list[TriangleProfile]:
    out = []
    while len(out) < count:
        y = rng.random(3)
        t = rng.random() * y.min()
        if feasible_mask(y[None], np.array([t]))[0]:
            pattern = patterns[rng.integers(len(patterns))]
            out.append(TriangleProfile(pattern, *map(float, y), float(t)))
    return out


# -- Monte Carlo oracle --------------------------------------------------------------

@dataclass
class TriangleSimulation:
    """Empirical per-pivot cost and budget release for a triangle embedded on three vertices."""

    trials: int
    cost_p: np.ndarray  # (3,) empirical Pr[opposite pair incurs cost | pivot]
    hit_p: np.ndarray  # (3,) empirical Pr[C meets the opposite pair | pivot]
    budget_p: np.ndarray  # (3,) budget of the opposite edge

    @property
    def cost(self) -> float:
        return float(self.cost_p.sum())

    @property
    def delta(self) -> float:
        return float((self.hit_p * self.budget_p).sum())


def simulate_triangle(T: TriangleProfile, rules: RuleSet, budgets: BudgetSpec, trials: int,
                      seed: int) -> TriangleSimulation:
    """Run the pivot step ``trials`` times at each forced pivot on the three-vertex embedding."""
    from .instance import Instance
    from .lp import ClusterLpSolution
    from .rounding import simulate_pivot_step

    plus = _signs(T.signs)
    edges = ((0, 1), (0, 2), (1, 2))
    inst = Instance.from_edges(3, [e for e, s in zip(edges, plus) if s])
    sol = ClusterLpSolution(3, {s: v for s, v in T.embedding_z().items() if v > 0}, inst=inst)
    rng = np.random.default_rng(seed)
    cost_p, hit_p, bud_p = np.empty(3), np.empty(3), np.empty(3)
    for k, (ea, eb, eo) in enumerate(PIVOT_EDGES):
        pivot = k  # PIVOT_EDGES is listed in pivot order u, v, w = 0, 1, 2
        a, b = edges[eo]
        joins = simulate_pivot_step(sol, rules, pivot, trials, rng, inst)
        ja, jb = joins[:, a], joins[:, b]
        cost_p[k] = np.mean(ja ^ jb) if plus[eo] else np.mean(ja & jb)
        hit_p[k] = np.mean(ja | jb)
        bud_p[k] = float(budgets.of(plus[eo], 1.0 - sol.y_pair_matrix[a, b]))
    return TriangleSimulation(trials, cost_p, hit_p, bud_p)


@dataclass
class OracleComparison:
    profile: TriangleProfile
    rules: str
    cost: float
    delta: float
    mc_cost: float
    mc_delta: float
    cost_sigma: float
    delta_sigma: float

    @property
    def cost_z(self) -> float:
        return _zscore(self.mc_cost - self.cost, self.cost_sigma)

    @property
    def delta_z(self) -> float:
        return _zscore(self.mc_delta - self.delta, self.delta_sigma)

    def within(self, k: float = 3.0) -> bool:
        return self.cost_z <= k and self.delta_z <= k


def _zscore(diff: float, sigma: float) -> float:
    if sigma > 0:
        return abs(diff) / sigma
    return 0.0 if abs(diff) <= 1e-12 else float("inf")


def compare_with_simulation(T: TriangleProfile, rules: RuleSet, budgets: BudgetSpec, trials: int,
                            seed: int) -> OracleComparison:
    """Closed-form cost/delta against the simulation, with sigma from the closed-form rates."""
    plus = _signs(T.signs)
    cost_p, hit_p, bud_p = pivot_terms(plus, classify(plus, T.y, rules), T.y, np.float64(T.y_uvw), rules, budgets)
    sim = simulate_triangle(T, rules, budgets, trials, seed)
    # the three pivots are simulated independently
    cost_var = np.sum(cost_p * (1 - cost_p)) / trials
    delta_var = np.sum(bud_p ** 2 * hit_p * (1 - hit_p)) / trials
    return OracleComparison(T, rules.name, float(cost_p.sum()), float((hit_p * bud_p).sum()),
                            sim.cost, sim.delta, float(np.sqrt(max(cost_var, 0.0))),
                            float(np.sqrt(max(delta_var, 0.0))))
