"""Exact cluster LP and pairwise (triangle-inequality) LP for small instances.

The cluster LP has one column per nonempty vertex subset S::

    min  sum_{uv in E+} x_uv + sum_{uv in E-} (1 - x_uv)
    s.t. sum_{S ∋ u} z_S = 1         for every u
         x_uv = 1 - sum_{S ⊇ {u,v}} z_S
         z >= 0

``x`` is a definition rather than a constraint row, so the objective is
written directly in ``z``: |E+| plus, for each S, (#- pairs in S) - (#+ pairs in S).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .errors import CapacityError, InfeasibleSolutionError, ValidationError
from .instance import SCHEMA_VERSION, FractionalAssignment, Instance
from .linalg import min_eigenvalue
from .simplex import LpProblem, LpSolverReport, solve_lp

API_TOL = 1e-7
SUPPORT_TOL = 1e-9


def _members(masks: np.ndarray, n: int) -> np.ndarray:
    """Boolean (len(masks), n) membership matrix of bitmask-encoded sets."""
    return ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


class TripleStats(NamedTuple):
    y_uv: float
    y_uw: float
    y_vw: float
    y_uvw: float
    y_uv_w: float  # y_{uv|w}
    y_uw_v: float
    y_vw_u: float
    y_u_v_w: float  # y_{u|v|w}


@dataclass
class YTable:
    """Bare co-clustering statistics: ``pair[u, v]`` and ``triple[u, v, w]``.

    Anything exposing ``y_pair_matrix`` and ``y_triple_tensor`` can be passed
    to the PSD checks; this class lets tests build tables by hand.
    """

    y_pair_matrix: np.ndarray
    y_triple_tensor: np.ndarray

    @property
    def n(self) -> int:
        return self.y_pair_matrix.shape[0]


class ClusterLpSolution:
    """Sparse ``S -> z_S`` with the derived pair and triple statistics."""

    def __init__(self, n: int, z: Mapping[frozenset, float], lp_value: float | None = None,
                 inst: Instance | None = None, report: LpSolverReport | None = None,
                 check: bool = True):
        self.n = int(n)
        items = []
        for s, val in z.items():
            s = frozenset(int(v) for v in s)
            if not s:
                raise ValidationError("z contains the empty set")
            if not all(0 <= v < self.n for v in s):
                raise ValidationError(f"set {sorted(s)} has a vertex outside [0, {self.n})")
            val = float(val)
            if val < -API_TOL:
                raise InfeasibleSolutionError(f"z[{sorted(s)}] = {val} is negative")
            if val > SUPPORT_TOL:
                items.append((s, val))
        items.sort(key=lambda kv: (len(kv[0]), sorted(kv[0])))
        self.sets: list[frozenset] = [s for s, _ in items]
        self.values = np.array([v for _, v in items], dtype=float)
        self.masks = np.array([sum(1 << v for v in s) for s in self.sets], dtype=np.int64)
        self.membership = _members(self.masks, self.n) if self.sets else np.zeros((0, self.n), bool)
        self.inst = inst
        self.report = report
        weighted = self.membership.T * self.values
        self.y_pair_matrix = weighted @ self.membership.astype(float)
        self._triple = None
        if check:
            self.check_feasible()
        if lp_value is None and inst is not None:
            lp_value = self.objective(inst)
        self.lp_value = lp_value

    @classmethod
    def from_clustering(cls, clustering, inst: Instance | None = None) -> "ClusterLpSolution":
        return cls(clustering.n, {c: 1.0 for c in clustering.clusters}, inst=inst)

    @property
    def z(self) -> dict[frozenset, float]:
        return dict(zip(self.sets, self.values.tolist()))

    @property
    def y_triple_tensor(self) -> np.ndarray:
        if self._triple is None:
            m = self.membership.astype(float)
            self._triple = np.einsum("k,ki,kj,kl->ijl", self.values, m, m, m)
        return self._triple

    def coverage(self) -> np.ndarray:
        return np.diag(self.y_pair_matrix).copy()

    def check_feasible(self, tol: float = API_TOL) -> None:
        if self.n == 0:
            return
        resid = np.abs(self.coverage() - 1.0)
        if resid.max() > tol:
            u = int(resid.argmax())
            raise InfeasibleSolutionError(
                f"coverage of vertex {u} is {self.coverage()[u]:.9g}, expected 1 (residual {resid.max():.2e})"
            )

    def y_pair(self, u: int, v: int) -> float:
        return float(self.y_pair_matrix[u, v])

    def y_triple(self, u: int, v: int, w: int) -> float:
        bits = (1 << u) | (1 << v) | (1 << w)
        return float(self.values[(self.masks & bits) == bits].sum())

    def x_matrix(self) -> np.ndarray:
        x = np.clip(1.0 - self.y_pair_matrix, 0.0, 1.0)
        np.fill_diagonal(x, 0.0)
        return x

    @property
    def x(self) -> FractionalAssignment:
        return FractionalAssignment.from_matrix(self.x_matrix())

    def objective(self, inst: Instance) -> float:
        if inst.n != self.n:
            raise ValidationError(f"solution is over {self.n} vertices but the instance has {inst.n}")
        iu = np.triu_indices(self.n, 1)
        x = self.x_matrix()[iu]
        plus = inst.adjacency[iu]
        return float(x[plus].sum() + (1.0 - x[~plus]).sum())

    def sample_distribution(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices into ``sets`` and probabilities of the sets containing ``u``."""
        idx = np.flatnonzero(self.membership[:, u])
        p = self.values[idx]
        return idx, p / p.sum()

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "z": [{"set": sorted(s), "value": v} for s, v in zip(self.sets, self.values.tolist())],
            "lp_value": self.lp_value,
        }


@dataclass
class PairwiseLpSolution:
    x: FractionalAssignment
    lp_value: float
    report: LpSolverReport | None = field(default=None, repr=False)

    def max_triangle_violation(self) -> float:
        return max_triangle_violation(self.x.matrix())


def max_triangle_violation(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 3:
        return 0.0
    # viol[u, v, w] = x_uv - x_uw - x_wv
    viol = x[:, :, None] - x[:, None, :] - x.T[None, :, :]
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    distinct = (i != j) & (j != k) & (i != k)
    return float(max(0.0, viol[distinct].max()))


# -- solvers ---------------------------------------------------------------

def cluster_lp_columns(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    """All nonempty subset masks and their objective coefficients."""
    n = inst.n
    masks = np.arange(1, 1 << n, dtype=np.int64)
    b = _members(masks, n).astype(float)
    adj = inst.adjacency.astype(float)
    plus_in = np.einsum("ki,ij,kj->k", b, adj, b) / 2
    size = b.sum(axis=1)
    pairs_in = size * (size - 1) / 2
    return masks, (pairs_in - plus_in) - plus_in


def solve_cluster_lp_exact(inst: Instance, max_n: int = 12) -> ClusterLpSolution:
    n = inst.n
    if n > max_n:
        raise CapacityError(
            f"the cluster LP over n={n} vertices has 2^{n}-1 = {(1 << n) - 1} columns; limit is n <= {max_n}"
        )
    if n == 0:
        return ClusterLpSolution(0, {}, lp_value=0.0, inst=inst)
    masks, cost = cluster_lp_columns(inst)
    A_eq = _members(masks, n).T.astype(float)
    z, report = solve_lp(LpProblem(cost, A_eq=A_eq, b_eq=np.ones(n)))
    support = {frozenset(np.flatnonzero(_members(masks[[k]], n)[0]).tolist()): z[k]
               for k in np.flatnonzero(z > SUPPORT_TOL)}
    lp_value = inst.num_plus + report.objective
    return ClusterLpSolution(n, support, lp_value=lp_value, inst=inst, report=report)


def solve_pairwise_lp(inst: Instance) -> PairwiseLpSolution:
    n = inst.n
    pairs = list(combinations(range(n), 2))
    index = {p: k for k, p in enumerate(pairs)}
    m = len(pairs)
    if m == 0:
        return PairwiseLpSolution(FractionalAssignment(n, {}), 0.0)
    sign = np.array([1.0 if inst.is_plus(*p) else -1.0 for p in pairs])
    rows = []
    for u, v, w in combinations(range(n), 3):
        a, b, c = index[(u, v)], index[(u, w)], index[(v, w)]
        for lhs, r1, r2 in ((a, b, c), (b, a, c), (c, a, b)):
            row = np.zeros(m)
            row[lhs], row[r1], row[r2] = 1.0, -1.0, -1.0
            rows.append(row)
    A_ub = np.vstack(rows + [np.eye(m)]) if rows else np.eye(m)
    b_ub = np.concatenate([np.zeros(len(rows)), np.ones(m)])
    x, report = solve_lp(LpProblem(sign, A_ub=A_ub, b_ub=b_ub))
    lp_value = inst.num_minus + report.objective
    fa = FractionalAssignment(n, {p: min(1.0, x[k]) for k, p in enumerate(pairs)})
    return PairwiseLpSolution(fa, lp_value, report)


# -- derived statistics and structural checks -------------------------------

def derive_triple_stats(sol: ClusterLpSolution, u: int, v: int, w: int) -> TripleStats:
    if len({u, v, w}) != 3:
        raise ValidationError("derive_triple_stats needs three distinct vertices")
    y_uv, y_uw, y_vw = sol.y_pair(u, v), sol.y_pair(u, w), sol.y_pair(v, w)
    t = sol.y_triple(u, v, w)
    uv_w, uw_v, vw_u = y_uv - t, y_uw - t, y_vw - t
    return TripleStats(y_uv, y_uw, y_vw, t, uv_w, uw_v, vw_u, 1.0 - uv_w - uw_v - vw_u - t)


def covariance_matrix(table, u: int) -> np.ndarray:
    """COV_u(v, w) = y_uvw - y_uv * y_uw over all v, w."""
    yp = np.asarray(table.y_pair_matrix)
    yt = np.asarray(table.y_triple_tensor)
    return yt[u] - np.outer(yp[u], yp[u])


def check_covariance_psd(table, u: int) -> float:
    return min_eigenvalue(covariance_matrix(table, u))


def check_gram_psd(table) -> float:
    """Smallest eigenvalue of (1 - x_uv) with unit diagonal, i.e. of the y_pair matrix."""
    y = np.array(table.y_pair_matrix, dtype=float)
    np.fill_diagonal(y, 1.0)
    return min_eigenvalue(y)


def weaker_lemma_violation(table) -> float:
    """Largest violation of 3 y_uvw <= y_uv + y_uw + y_vw <= 3/2 + 3/2 y_uvw over distinct triples."""
    yp = np.asarray(table.y_pair_matrix)
    yt = np.asarray(table.y_triple_tensor)
    n = yp.shape[0]
    if n < 3:
        return 0.0
    s = yp[:, :, None] + yp[:, None, :] + yp[None, :, :]
    lower = 3 * yt - s
    upper = s - 1.5 - 1.5 * yt
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    distinct = (i < j) & (j < k)
    return float(max(0.0, lower[distinct].max(), upper[distinct].max()))


def triple_bound_violation(table) -> float:
    """Largest amount by which some y_uvw exceeds min(y_uv, y_uw, y_vw)."""
    yp = np.asarray(table.y_pair_matrix)
    yt = np.asarray(table.y_triple_tensor)
    m = np.minimum(np.minimum(yp[:, :, None], yp[:, None, :]), yp[None, :, :])
    return float(max(0.0, (yt - m).max()))


# -- serialization ---------------------------------------------------------

def solution_from_json(data, source: str = "<solution>", inst: Instance | None = None) -> ClusterLpSolution:
    """Accepts ``{"n", "z": [...]}`` or the ``solve-lp`` output, which lists z under ``support``."""
    field_name = "z" if isinstance(data, dict) and "z" in data else "support"
    if not isinstance(data, dict) or "n" not in data or not isinstance(data.get(field_name), list):
        raise ValidationError(f"{source}: expected an object with fields 'n' and 'z'")
    z = {}
    for i, entry in enumerate(data[field_name]):
        try:
            s, val = frozenset(entry["set"]), float(entry["value"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{source}: z[{i}] must be {{'set': [...], 'value': number}}") from None
        if s in z:
            raise ValidationError(f"{source}: z[{i}] repeats set {sorted(s)}")
        z[s] = val
    return ClusterLpSolution(int(data["n"]), z, lp_value=data.get("lp_value"), inst=inst)


def read_solution(path, inst: Instance | None = None) -> ClusterLpSolution:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return solution_from_json(data, str(path), inst)


def write_solution(sol: ClusterLpSolution, path) -> None:
    Path(path).write_text(json.dumps(sol.to_json(), indent=1) + "\n")
