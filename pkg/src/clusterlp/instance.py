"""Complete signed graphs, clusterings and their objectives.

Vertices are ``0..n-1``.  Only the +edges are stored; every other unordered
pair is a -edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

SCHEMA_VERSION = 1


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Instance:
    n: int
    plus_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ValidationError(f"vertex count must be a non-negative integer, got {self.n!r}")
        edges = set()
        for e in self.plus_edges:
            u, v = (int(a) for a in e)
            if u == v:
                raise ValidationError(f"self-loop {{{u},{u}}} is not a valid +edge")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge {{{u},{v}}} has an endpoint outside [0, {self.n})")
            edges.add(_pair(u, v))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "plus_edges", frozenset(edges))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Instance":
        return cls(n, frozenset(tuple(e) for e in edges))

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean n x n matrix of +edges (zero diagonal)."""
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.plus_edges:
            a[u, v] = a[v, u] = True
        a.setflags(write=False)
        return a

    @property
    def num_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def num_plus(self) -> int:
        return len(self.plus_edges)

    @property
    def num_minus(self) -> int:
        return self.num_pairs - self.num_plus

    def is_plus(self, u: int, v: int) -> bool:
        return _pair(u, v) in self.plus_edges

    def plus_neighbors(self, u: int) -> set[int]:
        return set(np.flatnonzero(self.adjacency[u]).tolist())

    def induced(self, vertices: Iterable[int]) -> "Instance":
        """Subinstance on ``vertices``, relabelled to 0..k-1 in sorted order."""
        keep = sorted(set(vertices))
        index = {v: i for i, v in enumerate(keep)}
        edges = [(index[u], index[v]) for u, v in self.plus_edges if u in index and v in index]
        return Instance.from_edges(len(keep), edges)

    def to_json(self) -> dict:
        return {"n": self.n, "plus_edges": [list(e) for e in sorted(self.plus_edges)]}


@dataclass(frozen=True)
class Clustering:
    """A partition of ``0..n-1``; clusters are kept sorted by smallest member."""

    clusters: tuple

    def __post_init__(self):
        blocks = []
        for c in self.clusters:
            block = frozenset(int(v) for v in c)
            if not block:
                raise ValidationError("clusters must be nonempty")
            blocks.append(block)
        blocks.sort(key=min)
        seen: set[int] = set()
        for b in blocks:
            if seen & b:
                raise ValidationError(f"vertices {sorted(seen & b)} appear in more than one cluster")
            seen |= b
        if seen != set(range(len(seen))):
            missing = sorted(set(range(max(seen) + 1)) - seen) if seen else []
            raise ValidationError(f"clusters do not cover 0..{len(seen) - 1}; missing {missing}")
        object.__setattr__(self, "clusters", tuple(blocks))

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.clusters)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "Clustering":
        groups: dict[int, list[int]] = {}
        for v, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(v)
        return cls(tuple(groups.values()))

    @classmethod
    def singletons(cls, n: int) -> "Clustering":
        return cls(tuple((v,) for v in range(n)))

    @classmethod
    def one_cluster(cls, n: int) -> "Clustering":
        return cls((tuple(range(n)),) if n else ())

    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=np.int64)
        for i, c in enumerate(self.clusters):
            lab[list(c)] = i
        return lab

    def restricted_growth(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.labels())

    def same_cluster(self, u: int, v: int) -> bool:
        lab = self.labels()
        return lab[u] == lab[v]

    def to_json(self) -> dict:
        return {"clusters": [sorted(c) for c in self.clusters]}


class FractionalAssignment:
    """Symmetric pair values x_uv in [0, 1] keyed by unordered pair."""

    def __init__(self, n: int, values: Mapping[tuple[int, int], float]):
        self.n = int(n)
        self._x: dict[tuple[int, int], float] = {}
        for (u, v), val in values.items():
            if u == v:
                continue
            val = float(val)
            if not (-1e-9 <= val <= 1 + 1e-9):
                raise ValidationError(f"x[{u},{v}] = {val} is outside [0, 1]")
            self._x[_pair(u, v)] = min(1.0, max(0.0, val))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "FractionalAssignment":
        n = m.shape[0]
        return cls(n, {(u, v): m[u, v] for u, v in combinations(range(n), 2)})

    @classmethod
    def from_clustering(cls, c: Clustering) -> "FractionalAssignment":
        lab = c.labels()
        n = len(lab)
        return cls(n, {(u, v): float(lab[u] != lab[v]) for u, v in combinations(range(n), 2)})

    def __getitem__(self, uv: tuple[int, int]) -> float:
        u, v = uv
        if u == v:
            return 0.0
        try:
            return self._x[_pair(u, v)]
        except KeyError:
            raise ValidationError(f"pair {{{u},{v}}} has no value") from None

    def items(self):
        return self._x.items()

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        for (u, v), val in self._x.items():
            m[u, v] = m[v, u] = val
        return m

    def to_json(self) -> dict:
        return {"n": self.n, "x": [[u, v, val] for (u, v), val in sorted(self._x.items())]}


def _check_partition(inst: Instance, c: Clustering) -> None:
    if c.n != inst.n:
        raise ValidationError(f"clustering covers {c.n} vertices but the instance has {inst.n}")


def objective_clustering(inst: Instance, c: Clustering) -> int:
    """+edges cut plus -edges kept inside a cluster."""
    _check_partition(inst, c)
    lab = c.labels()
    same = lab[:, None] == lab[None, :]
    iu = np.triu_indices(inst.n, 1)
    plus = inst.adjacency[iu]
    together = same[iu]
    return int(np.count_nonzero(plus & ~together) + np.count_nonzero(~plus & together))


def objective_fractional(inst: Instance, x: FractionalAssignment) -> float:
    if x.n != inst.n:
        raise ValidationError(f"assignment is over {x.n} vertices but the instance has {inst.n}")
    total = 0.0
    for u, v in combinations(range(inst.n), 2):
        val = x[u, v]
        total += val if inst.is_plus(u, v) else 1.0 - val
    return total


def generate_random(n: int, plus_prob: float, seed: int) -> Instance:
    if n < 1:
        raise ValidationError("n must be at least 1")
    if not (0.0 <= plus_prob <= 1.0):
        raise ValidationError(f"plus_prob must lie in [0, 1], got {plus_prob}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    mask = rng.random(iu.size) < plus_prob
    return Instance.from_edges(n, zip(iu[mask].tolist(), ju[mask].tolist()))



def generate_planted(n: int, k: int, noise: float, seed: int) -> Instance:
    """k planted clusters of near-equal size; each pair's sign is flipped with probability ``noise``."""
    if n < 1 or k < 1:
        raise ValidationError("n and k must be at least 1")
    if not (0.0 <= noise <= 1.0):
        raise ValidationError(f"noise must lie in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % k)
    iu, ju = np.triu_indices(n, 1)
    plus = (labels[iu] == labels[ju]) ^ (rng.random(iu.size) < noise)
    return Instance.from_edges(n, zip(iu[plus].tolist(), ju[plus].tolist()))


# -- serialization ---------------------------------------------------------

def _load_json(path) -> object:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def instance_from_json(data, source: str = "<instance>") -> Instance:
    if not isinstance(data, dict) or "n" not in data or "plus_edges" not in data:
        raise ValidationError(f"{source}: expected an object with fields 'n' and 'plus_edges'")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValidationError(f"{source}: field 'n' must be a non-negative integer")
    seen = set()
    for i, e in enumerate(data["plus_edges"]):
        if (not isinstance(e, list) or len(e) != 2
                or not all(isinstance(a, int) and not isinstance(a, bool) for a in e)):
            raise ValidationError(f"{source}: plus_edges[{i}] must be a pair of integers")
        u, v = e
        if u == v:
            raise ValidationError(f"{source}: plus_edges[{i}] is a self-loop {{{u},{v}}}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError(f"{source}: plus_edges[{i}] = {e} has an endpoint outside [0, {n})")
        key = _pair(u, v)
        if key in seen:
            raise ValidationError(f"{source}: plus_edges[{i}] duplicates pair {{{key[0]},{key[1]}}}")
        seen.add(key)
    return Instance(n, frozenset(seen))


def read_instance(path) -> Instance:
    return instance_from_json(_load_json(path), str(path))


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_json()) + "\n")


def clustering_from_json(data, source: str = "<clustering>") -> Clustering:
    if not isinstance(data, dict) or not isinstance(data.get("clusters"), list):
        raise ValidationError(f"{source}: expected an object with a 'clusters' list")
    for i, c in enumerate(data["clusters"]):
        if not isinstance(c, list) or not all(isinstance(v, int) for v in c):
            raise ValidationError(f"{source}: clusters[{i}] must be a list of integers")
    return Clustering(tuple(tuple(c) for c in data["clusters"]))


def read_clustering(path) -> Clustering:
    return clustering_from_json(_load_json(path), str(path))


def write_clustering(c: Clustering, path) -> None:
    Path(path).write_text(json.dumps(c.to_json()) + "\n")
