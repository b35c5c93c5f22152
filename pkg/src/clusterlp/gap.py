"""Integrality-gap family: the line graph of K_n.

Vertices are the edges of K_n; two of them are joined by a +edge iff they
share an endpoint.  Putting weight 1/2 on each of the n stars gives a
fractional solution of value C(n,2)(n-2)/2, while greedy star clusterings
cost n(n-1)(n-2)/3, so the ratio is exactly 4/3.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from .errors import CapacityError, ValidationError
from .exact import solve_exact
from .instance import Clustering, Instance, objective_clustering
from .lp import ClusterLpSolution, solve_cluster_lp_exact


@dataclass(frozen=True)
class LineGraphInstance:
    base_n: int
    instance: Instance
    base_edges: tuple[tuple[int, int], ...]  # vertex index -> base edge

    @property
    def degree(self) -> int:
        return self.base_n - 1

    def index_of(self, a: int, b: int) -> int:
        return self.base_edges.index((min(a, b), max(a, b)))

    def star(self, v: int) -> frozenset:
        return frozenset(i for i, e in enumerate(self.base_edges) if v in e)


def build_line_graph_instance(n: int) -> LineGraphInstance:
    if n < 3:
        raise ValidationError(f"need n >= 3, got {n}")
    edges = tuple(combinations(range(n), 2))
    plus = [(i, j) for i, j in combinations(range(len(edges)), 2) if set(edges[i]) & set(edges[j])]
    return LineGraphInstance(n, Instance.from_edges(len(edges), plus), edges)


def fractional_star_solution(lgi: LineGraphInstance) -> ClusterLpSolution:
    """z = 1/2 on every star; each base edge lies in exactly two stars."""
    z = {lgi.star(v): 0.5 for v in range(lgi.base_n)}
    return ClusterLpSolution(lgi.instance.n, z, inst=lgi.instance)


def fractional_value(n: int) -> Fraction:
    return Fraction(comb(n, 2) * (n - 2), 2)


def star_cost_formula(n: int) -> Fraction:
    return Fraction(n * (n - 1) * (n - 2), 3)


def star_clustering(lgi: LineGraphInstance, order) -> Clustering:
    order = [int(v) for v in order]
    if sorted(order) != list(range(lgi.base_n)):
        raise ValidationError("order must be a permutation of the base vertices")
    taken: set[int] = set()
    clusters = []
    for v in order:
        part = lgi.star(v) - taken
        if part:
            clusters.append(tuple(sorted(part)))
            taken |= part
    return Clustering(tuple(clusters))


def star_cost_count(n: int) -> int:
    """Cost of a star clustering by direct counting: |E+| minus the +pairs kept inside clusters."""
    plus_total = comb(n, 2) * 2 * (n - 2) // 2
    inside = sum(comb(n - i, 2) for i in range(1, n + 1))
    return plus_total - inside


def cluster_size_bound_check(lgi: LineGraphInstance, c: Clustering) -> bool:
    """True iff every vertex has at least (|C| - 1)/2 +neighbors inside its cluster C."""
    if c.n != lgi.instance.n:
        raise ValidationError("clustering is over a different vertex count")
    adj = lgi.instance.adjacency
    for cl in c.clusters:
        members = sorted(cl)
        inside = adj[np.ix_(members, members)].sum(axis=1)
        if np.any(2 * inside < len(members) - 1):
            return False
    return True


@dataclass
class GapRow:
    n: int
    fractional: Fraction
    star_cost: Fraction
    opt: int | None = None
    lp_value: float | None = None
    note: str = ""

    @property
    def ratio(self) -> Fraction:
        return self.star_cost / self.fractional

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "vertices": comb(self.n, 2),
            "fractional_value": str(self.fractional),
            "star_cost": str(self.star_cost),
            "ratio": str(self.ratio),
            "opt": self.opt,
            "lp_value": self.lp_value,
            "opt_over_lp": (self.opt / self.lp_value) if self.opt is not None and self.lp_value else None,
            "note": self.note,
        }


def gap_report(n_list, exact_max_vertices: int = 10) -> list[GapRow]:
    """Exact accounting per n; the oracle and the cluster LP run when C(n,2) is small enough."""
    rows = []
    for n in n_list:
        lgi = build_line_graph_instance(n)
        star = star_clustering(lgi, range(n))
        cost = objective_clustering(lgi.instance, star) if n <= 60 else star_cost_count(n)
        row = GapRow(n, fractional_value(n), Fraction(cost))
        if lgi.instance.n <= exact_max_vertices:
            try:
                row.opt = solve_exact(lgi.instance, max_n=exact_max_vertices).opt_value
                row.lp_value = solve_cluster_lp_exact(lgi.instance, max_n=exact_max_vertices).lp_value
            except CapacityError as exc:
                row.note = str(exc)
        else:
            row.note = f"exact parts skipped: {lgi.instance.n} vertices exceed {exact_max_vertices}"
        rows.append(row)
    return rows
