"""Exhaustive optimal clustering for small instances.

Partitions are walked as restricted-growth strings in lexicographic order
with branch-and-bound on the partial cost, so the first minimiser found is
the lexicographically smallest one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import CapacityError, ValidationError
from .instance import Clustering, Instance, objective_clustering


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    # Bell triangle
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


@dataclass(frozen=True)
class OptResult:
    opt_value: int
    witness: Clustering
    partitions_enumerated: int


def solve_exact(inst: Instance, max_n: int = 12, prune: bool = True) -> OptResult:
    n = inst.n
    if n > max_n:
        raise CapacityError(
            f"exact search over n={n} vertices visits up to Bell({n}) = {bell_number(n)} partitions; "
            f"limit is n <= {max_n} (Bell({max_n}) = {bell_number(max_n)})"
        )
    if n == 0:
        return OptResult(0, Clustering(()), 1)

    plus_mask = [0] * n
    for u, v in inst.plus_edges:
        plus_mask[u] |= 1 << v
        plus_mask[v] |= 1 << u

    # singletons and the one-cluster partition bound opt; +1 so the first
    # partition reaching that cost is still recorded (lexicographic tie-break)
    best_cost = min(inst.num_plus, inst.num_minus) + 1
    best_labels: list[int] | None = None
    count = 0
    labels = [0] * n
    block_masks: list[int] = []

    def descend(i: int, cost: int) -> None:
        nonlocal best_cost, best_labels, count
        if i == n:
            count += 1
            if cost < best_cost:
                best_cost = cost
                best_labels = labels.copy()
            return
        earlier = (1 << i) - 1
        pm = plus_mask[i] & earlier
        plus_total = pm.bit_count()
        for b, bm in enumerate(block_masks):
            plus_in = (pm & bm).bit_count()
            # cut +edges to other blocks, -edges inside this block
            delta = (plus_total - plus_in) + (bm.bit_count() - plus_in)
            if prune and cost + delta >= best_cost:
                continue
            labels[i] = b
            block_masks[b] = bm | (1 << i)
            descend(i + 1, cost + delta)
            block_masks[b] = bm
        delta = plus_total
        if not prune or cost + delta < best_cost:
            labels[i] = len(block_masks)
            block_masks.append(1 << i)
            descend(i + 1, cost + delta)
            block_masks.pop()

    if not prune:
        best_cost = inst.num_pairs + 1
    descend(0, 0)
    assert best_labels is not None
    witness = Clustering.from_labels(best_labels)
    return OptResult(best_cost, witness, count)


def is_good_clustering(c: Clustering, atoms: Clustering, admissible) -> bool:
    """True iff ``c`` keeps every atom whole and only co-clusters admissible cross-atom pairs."""
    if c.n != atoms.n:
        raise ValidationError("clustering and atoms are over different vertex counts")
    adm = {(min(u, v), max(u, v)) for u, v in admissible}
    lab = c.labels()
    atom = atoms.labels()
    for (u, v) in adm:
        if atom[u] == atom[v]:
            raise ValidationError(f"admissible pair {{{u},{v}}} lies inside an atom")
    n = c.n
    for u in range(n):
        for v in range(u + 1, n):
            if atom[u] == atom[v]:
                if lab[u] != lab[v]:
                    return False
            elif lab[u] == lab[v] and (u, v) not in adm:
                return False
    return True


def brute_force_min(inst: Instance) -> int:
    """Unpruned reference used by tests: min objective over every partition."""
    best = None
    for rgs in restricted_growth_strings(inst.n):
        cost = objective_clustering(inst, Clustering.from_labels(rgs))
        best = cost if best is None else min(best, cost)
    return best if best is not None else 0


def restricted_growth_strings(n: int):
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield tuple(a)
            return
        for b in range(m + 2):
            a[i] = b
            yield from rec(i + 1, max(m, b))

    a[0] = 0
    yield from rec(1, 0)


def solve_exact_grouped(inst: Instance, groups: Clustering, compatible) -> OptResult:
    """Cheapest clustering that keeps each group whole and only merges compatible groups.

    ``compatible[g][h]`` says whether groups ``g`` and ``h`` (indices into
    ``groups.clusters``) may share a cluster.  The search is the same
    restricted-growth enumeration as :func:`solve_exact`, but over groups.
    """
    blocks_of = [sorted(c) for c in groups.clusters]
    m = len(blocks_of)
    if m > 12:
        raise CapacityError(f"grouped search over {m} groups exceeds the limit of 12 (Bell(12) = {bell_number(12)})")
    plus_mask = [0] * inst.n
    for u, v in inst.plus_edges:
        plus_mask[u] |= 1 << v
        plus_mask[v] |= 1 << u
    gmask = [sum(1 << v for v in g) for g in blocks_of]
    internal = []
    for g, gm in zip(blocks_of, gmask):
        plus_inside = sum((plus_mask[v] & gm).bit_count() for v in g) // 2
        internal.append(len(g) * (len(g) - 1) // 2 - plus_inside)

    best_cost = inst.num_pairs + 1
    best: list[list[int]] | None = None
    count = 0
    blocks: list[list[int]] = []  # group indices per block
    bmasks: list[int] = []

    def descend(i: int, earlier: int, cost: int) -> None:
        nonlocal best_cost, best, count
        if i == m:
            count += 1
            if cost < best_cost:
                best_cost = cost
                best = [list(b) for b in blocks]
            return
        g = blocks_of[i]
        plus_total = sum((plus_mask[v] & earlier).bit_count() for v in g)
        base = cost + internal[i]
        for b, bm in enumerate(bmasks):
            if not all(compatible[i][h] for h in blocks[b]):
                continue
            plus_in = sum((plus_mask[v] & bm).bit_count() for v in g)
            delta = (plus_total - plus_in) + (len(g) * bm.bit_count() - plus_in)
            if base + delta >= best_cost:
                continue
            blocks[b].append(i)
            bmasks[b] = bm | gmask[i]
            descend(i + 1, earlier | gmask[i], base + delta)
            blocks[b].pop()
            bmasks[b] = bm
        if base + plus_total < best_cost:
            blocks.append([i])
            bmasks.append(gmask[i])
            descend(i + 1, earlier | gmask[i], base + plus_total)
            blocks.pop()
            bmasks.pop()

    descend(0, 0, 0)
    if best is None:
        return OptResult(0, Clustering(()), count)
    clusters = tuple(tuple(v for h in b for v in blocks_of[h]) for b in best)
    return OptResult(best_cost, Clustering(clusters), count)
