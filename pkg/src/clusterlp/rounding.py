"""Rounding a cluster-LP solution into a clustering.

Three procedures are provided: cluster-based rounding (sample whole sets
from z), pivot rounding under a :class:`RuleSet`, and the classic
combinatorial pivot that ignores the LP.  ``best_of`` runs the first two and
keeps the cheaper clustering.

Every randomized function takes an explicit seed and is deterministic in it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSolutionError, ValidationError
from .instance import Clustering, Instance, objective_clustering
from .lp import ClusterLpSolution

# x values within this distance of a threshold are classified as if equal to it
CLASS_TOL = 1e-9

SHORT, DEPENDENT, INDEPENDENT_PLUS = 0, 1, 2


@dataclass(frozen=True)
class RuleSet:
    """Per-edge inclusion rules for pivot rounding.

    A +edge with ``x <= tau1`` joins the pivot deterministically, one with
    ``tau1 < x <= tau2`` joins iff it lies in the sampled set S, and one with
    ``x > tau2`` joins independently with probability ``1 - x``.  A -edge
    joins independently with probability ``1 - x ** minus_power``.
    """

    name: str
    tau1: float
    tau2: float
    minus_power: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.tau1 <= self.tau2 <= 1.0):
            raise ValidationError(f"need 0 <= tau1 <= tau2 <= 1, got ({self.tau1}, {self.tau2})")
        if self.minus_power <= 0:
            raise ValidationError("minus_power must be positive")

    def plus_class(self, x):
        """0 for short, 1 for the dependent interval, 2 for independent +edges."""
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.tau1 + CLASS_TOL, SHORT,
                        np.where(x <= self.tau2 + CLASS_TOL, DEPENDENT, INDEPENDENT_PLUS))

    def plus_join(self, x):
        return 1.0 - np.asarray(x, dtype=float)

    def minus_join(self, x):
        return 1.0 - np.asarray(x, dtype=float) ** self.minus_power

    def to_json(self) -> dict:
        return {"name": self.name, "tau1": self.tau1, "tau2": self.tau2, "minus_power": self.minus_power}


ALG3 = RuleSet("alg3", 0.4, 1.0, 1.0)
ALG4 = RuleSet("alg4", 0.4, 0.57, 2.0)
INDEPENDENT = RuleSet("independent", 0.0, 0.0, 1.0)
RULES = {r.name: r for r in (ALG3, ALG4, INDEPENDENT)}


class AliasSampler:
    """Walker's alias method (Vose's construction) for O(1) categorical draws."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or p.sum() <= 0:
            raise ValidationError("alias sampler needs a nonempty nonnegative weight vector")
        k = p.size
        scaled = p * (k / p.sum())
        self.prob = np.ones(k)
        self.alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            self.prob[i] = 1.0

    def sample(self, rng: np.random.Generator, size=None):
        k = self.prob.size
        i = rng.integers(k, size=size)
        keep = rng.random(size=size) < self.prob[i]
        return np.where(keep, i, self.alias[i])


@dataclass
class PivotStep:
    pivot: int
    sampled_set: frozenset
    cluster: frozenset


@dataclass
class RoundingTrace:
    seed: int
    rules: str
    steps: list[PivotStep] = field(default_factory=list)
    clustering: Clustering | None = None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "rules": self.rules,
            "steps": [{"pivot": s.pivot, "sampled_set": sorted(s.sampled_set), "cluster": sorted(s.cluster)}
                      for s in self.steps],
            "clusters": self.clustering.to_json()["clusters"] if self.clustering else None,
        }


def _require_support(sol: ClusterLpSolution) -> None:
    if sol.values.size == 0 and sol.n > 0:
        raise InfeasibleSolutionError("the solution has empty z support")


def _instance_of(sol: ClusterLpSolution, inst: Instance | None) -> Instance:
    inst = inst if inst is not None else sol.inst
    if inst is None:
        raise ValidationError("pivot rounding needs the instance (edge signs); pass inst=")
    if inst.n != sol.n:
        raise ValidationError(f"solution is over {sol.n} vertices but the instance has {inst.n}")
    return inst


class _PivotSamplers:
    """Per-vertex alias tables over the sets containing that vertex."""

    def __init__(self, sol: ClusterLpSolution):
        self.sol = sol
        self._cache: dict[int, tuple[np.ndarray, AliasSampler]] = {}

    def get(self, u: int) -> tuple[np.ndarray, AliasSampler]:
        if u not in self._cache:
            idx, p = self.sol.sample_distribution(u)
            if idx.size == 0:
                raise InfeasibleSolutionError(f"vertex {u} is covered by no set of the support")
            self._cache[u] = (idx, AliasSampler(p))
        return self._cache[u]

    def draw(self, u: int, rng, size=None):
        idx, sampler = self.get(u)
        return idx[sampler.sample(rng, size)]


# -- the procedures ----------------------------------------------------------

def round_cluster_based(sol: ClusterLpSolution, seed: int) -> Clustering:
    """Repeatedly draw S with probability proportional to z_S and split off S ∩ V'."""
    _require_support(sol)
    rng = np.random.default_rng(seed)
    sampler = AliasSampler(sol.values)
    remaining = np.ones(sol.n, dtype=bool)
    clusters = []
    while remaining.any():
        s = sol.membership[sampler.sample(rng)]
        c = s & remaining
        if c.any():
            clusters.append(np.flatnonzero(c).tolist())
            remaining &= ~s
    return Clustering(tuple(clusters))


def round_pivot(sol: ClusterLpSolution, rules: RuleSet, seed: int,
                inst: Instance | None = None) -> RoundingTrace:
    _require_support(sol)
    inst = _instance_of(sol, inst)
    rng = np.random.default_rng(seed)
    samplers = _PivotSamplers(sol)
    x = sol.x_matrix()
    plus = inst.adjacency
    remaining = np.ones(sol.n, dtype=bool)
    trace = RoundingTrace(seed=seed, rules=rules.name)
    while remaining.any():
        alive = np.flatnonzero(remaining)
        u = int(alive[rng.integers(alive.size)])
        s_idx = int(samplers.draw(u, rng))
        in_s = sol.membership[s_idx]
        join = _pivot_joins(u, x[u], plus[u], in_s[None, :], rng.random((1, sol.n)), rules)[0]
        c = join & remaining
        c[u] = True
        trace.steps.append(PivotStep(u, sol.sets[s_idx], frozenset(np.flatnonzero(c).tolist())))
        remaining &= ~c
    trace.clustering = Clustering(tuple(s.cluster for s in trace.steps))
    return trace


def _pivot_joins(u, x_u, plus_u, in_s, uniforms, rules: RuleSet) -> np.ndarray:
    """Inclusion decisions of every vertex for pivot ``u``; rows are independent draws."""
    cls = rules.plus_class(x_u)
    join_plus = np.where(cls == SHORT, True,
                         np.where(cls == DEPENDENT, in_s, uniforms < rules.plus_join(x_u)))
    join_minus = uniforms < rules.minus_join(x_u)
    join = np.where(plus_u, join_plus, join_minus)
    join[:, u] = True
    return join


def round_classic_pivot(inst: Instance, seed: int) -> Clustering:
    """Combinatorial pivot: the pivot takes every remaining +neighbor."""
    rng = np.random.default_rng(seed)
    remaining = np.ones(inst.n, dtype=bool)
    clusters = []
    while remaining.any():
        alive = np.flatnonzero(remaining)
        u = int(alive[rng.integers(alive.size)])
        c = inst.adjacency[u] & remaining
        c[u] = True
        clusters.append(np.flatnonzero(c).tolist())
        remaining &= ~c
    return Clustering(tuple(clusters))


@dataclass
class BestOfResult:
    clustering: Clustering
    cost: int
    cluster_costs: np.ndarray
    pivot_costs: np.ndarray

    @property
    def per_trial_best(self) -> np.ndarray:
        return np.minimum(self.cluster_costs, self.pivot_costs)


def best_of(sol: ClusterLpSolution, seed: int, trials: int, rules: RuleSet = ALG3,
            inst: Instance | None = None) -> BestOfResult:
    """Run cluster-based and pivot rounding ``trials`` times each; keep the cheapest output."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    inst = _instance_of(sol, inst)
    ss_cluster, ss_pivot = np.random.SeedSequence(seed).spawn(2)
    c_seeds = ss_cluster.generate_state(trials, dtype=np.uint64)
    p_seeds = ss_pivot.generate_state(trials, dtype=np.uint64)
    best, best_cost = None, None
    cc, pc = np.empty(trials, dtype=np.int64), np.empty(trials, dtype=np.int64)
    for t in range(trials):
        a = round_cluster_based(sol, int(c_seeds[t]))
        b = round_pivot(sol, rules, int(p_seeds[t]), inst).clustering
        cc[t], pc[t] = objective_clustering(inst, a), objective_clustering(inst, b)
        for c, cost in ((a, cc[t]), (b, pc[t])):
            if best_cost is None or cost < best_cost:
                best, best_cost = c, int(cost)
    return BestOfResult(best, best_cost, cc, pc)


# -- Monte Carlo harness -------------------------------------------------------

def pivot_inclusion_probabilities(sol: ClusterLpSolution, rules: RuleSet, u: int,
                                  inst: Instance | None = None) -> np.ndarray:
    """Closed-form Pr[v ∈ C | u is the first pivot] for every v (1 at v = u)."""
    inst = _instance_of(sol, inst)
    x_u = sol.x_matrix()[u]
    y_u = sol.y_pair_matrix[u]
    cls = rules.plus_class(x_u)
    p_plus = np.where(cls == SHORT, 1.0, np.where(cls == DEPENDENT, y_u, rules.plus_join(x_u)))
    p = np.where(inst.adjacency[u], p_plus, rules.minus_join(x_u))
    p[u] = 1.0
    return p


def pivot_joint_probabilities(sol: ClusterLpSolution, rules: RuleSet, u: int,
                              inst: Instance | None = None) -> np.ndarray:
    """Closed-form Pr[v, w ∈ C | u is the first pivot] as an n x n matrix."""
    inst = _instance_of(sol, inst)
    p = pivot_inclusion_probabilities(sol, rules, u, inst)
    dep = inst.adjacency[u] & (rules.plus_class(sol.x_matrix()[u]) == DEPENDENT)
    joint = np.outer(p, p)
    both = np.outer(dep, dep)
    joint[both] = sol.y_triple_tensor[u][both]
    np.fill_diagonal(joint, p)
    return joint


def simulate_pivot_step(sol: ClusterLpSolution, rules: RuleSet, u: int, trials: int,
                        rng: np.random.Generator, inst: Instance | None = None) -> np.ndarray:
    """Boolean (trials, n) inclusion matrix for one pivot step forced at ``u`` with V' = V."""
    _require_support(sol)
    inst = _instance_of(sol, inst)
    s_idx = _PivotSamplers(sol).draw(u, rng, size=trials)
    in_s = sol.membership[s_idx]
    return _pivot_joins(u, sol.x_matrix()[u], inst.adjacency[u], in_s, rng.random((trials, sol.n)), rules)


def simulate_cluster_based_labels(sol: ClusterLpSolution, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Cluster labels of ``trials`` independent runs of cluster-based rounding.

    Each vertex ends up in the cluster of the first drawn set containing it,
    so a run is fully described by the index of that first draw.
    """
    _require_support(sol)
    sampler = AliasSampler(sol.values)
    n = sol.n
    labels = np.full((trials, n), -1, dtype=np.int64)
    offset = 0
    chunk = max(8, int(4 * sol.values.sum() * max(1.0, np.log(n + 1))))
    while (labels < 0).any():
        draws = sampler.sample(rng, size=(trials, chunk))
        hit = sol.membership[draws]  # (trials, chunk, n)
        first = np.argmax(hit, axis=1)
        found = hit.any(axis=1)
        fresh = (labels < 0) & found
        labels[fresh] = (first + offset)[fresh]
        offset += chunk
    return labels


@dataclass
class MarginalEstimate:
    """Empirical frequencies with binomial standard errors."""

    trials: int
    estimate: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray | None = None

    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.estimate - self.expected))) if self.expected is not None else float("nan")

    def max_z(self) -> float:
        if self.expected is None:
            return float("nan")
        se = np.sqrt(np.maximum(self.expected * (1 - self.expected), 1e-300) / self.trials)
        return float(np.max(np.abs(self.estimate - self.expected) / se))


def _estimate(freq: np.ndarray, trials: int, expected=None) -> MarginalEstimate:
    se = np.sqrt(freq * (1 - freq) / trials)
    return MarginalEstimate(trials, freq, se, expected)


def estimate_edge_marginals(sol: ClusterLpSolution, rules: RuleSet | str, trials: int, seed: int,
                            inst: Instance | None = None) -> dict:
    """Empirical per-pair statistics for a rounding procedure.

    ``rules="cluster"`` estimates Pr[u, v separated] for cluster-based rounding
    (expected ``2x/(1+x)``).  A :class:`RuleSet` estimates the per-pivot
    inclusion matrix ``P[u, v] = Pr[v ∈ C | u pivots first]``.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    if rules == "cluster":
        labels = simulate_cluster_based_labels(sol, trials, rng)
        sep = (labels[:, :, None] != labels[:, None, :]).mean(axis=0)
        x = sol.x_matrix()
        return {"separation": _estimate(sep, trials, 2 * x / (1 + x))}
    if isinstance(rules, str):
        rules = RULES[rules]
    inst = _instance_of(sol, inst)
    n = sol.n
    freq = np.empty((n, n))
    expected = np.empty((n, n))
    for u in range(n):
        joins = simulate_pivot_step(sol, rules, u, trials, rng, inst)
        freq[u] = joins.mean(axis=0)
        expected[u] = pivot_inclusion_probabilities(sol, rules, u, inst)
    return {"inclusion": _estimate(freq, trials, expected)}
