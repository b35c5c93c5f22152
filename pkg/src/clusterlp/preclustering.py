"""Preclustering: atoms, averaged weights and admissible pairs.

Within this module every vertex carries a +self-loop, so ``N+_u`` contains
``u`` and the averaged weight ``w_uu`` is 1.  Pairs are unordered; the E1
and E2 sets include self pairs ``(u, u)`` while the admissible set never does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .exact import OptResult, solve_exact, solve_exact_grouped
from .instance import Clustering, Instance, objective_clustering
from .rounding import round_classic_pivot

DEFAULT_BETA = 0.1


def _pairs_of(mask: np.ndarray, include_diagonal: bool) -> frozenset:
    iu, ju = np.nonzero(np.triu(mask, 0 if include_diagonal else 1))
    return frozenset(zip(iu.tolist(), ju.tolist()))


def _plus_with_loops(inst: Instance) -> np.ndarray:
    a = np.array(inst.adjacency)
    np.fill_diagonal(a, True)
    return a


def build_atoms(inst: Instance, beta: float = DEFAULT_BETA, seed: int = 0,
                start: Clustering | None = None) -> Clustering:
    """Split a starting clustering into atoms by marking poorly connected vertices.

    In each non-singleton cluster C, ``u`` is marked when ``|N+_u △ C| > beta/2 · |C|``;
    if at least ``beta·|C|/3`` vertices of C are marked, all of C is.  Marked
    vertices become singletons.  Without ``start`` the classic pivot clustering
    with ``seed`` is used.
    """
    if not (0.0 < beta < 1.0):
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    if start is None:
        start = round_classic_pivot(inst, seed)
    elif start.n != inst.n:
        raise ValidationError("starting clustering is over a different vertex count")
    plus = _plus_with_loops(inst)
    atoms: list[list[int]] = []
    for c in start.clusters:
        members = sorted(c)
        if len(members) == 1:
            atoms.append(members)
            continue
        in_c = np.zeros(inst.n, dtype=bool)
        in_c[members] = True
        sym_diff = (plus[members] ^ in_c[None, :]).sum(axis=1)
        marked = sym_diff > beta / 2 * len(members)
        if marked.sum() >= beta * len(members) / 3:
            marked[:] = True
        kept = [v for v, m in zip(members, marked) if not m]
        if kept:
            atoms.append(kept)
        atoms.extend([v] for v, m in zip(members, marked) if m)
    return Clustering(tuple(atoms))


def dense_atom_violations(inst: Instance, atoms: Clustering, beta: float = DEFAULT_BETA) -> list[tuple[int, int, int]]:
    """(vertex, |N+_u △ K|, |K|) for every u in a non-singleton atom K with |N+_u △ K| >= beta·|K|."""
    plus = _plus_with_loops(inst)
    bad = []
    for k in atoms.clusters:
        if len(k) < 2:
            continue
        in_k = np.zeros(inst.n, dtype=bool)
        in_k[list(k)] = True
        for u in sorted(k):
            d = int((plus[u] ^ in_k).sum())
            if not d < beta * len(k):
                bad.append((u, d, len(k)))
    return bad


@dataclass(frozen=True)
class AveragedWeights:
    w: np.ndarray  # n x n, w[u, u] = 1
    totals: np.ndarray  # w_u = sum_v w_uv (self included)
    atom_size: np.ndarray  # k_u
    atom_of: np.ndarray  # index of K_u in atoms.clusters


def averaged_weights(inst: Instance, atoms: Clustering) -> AveragedWeights:
    """w_uv = fraction of + pairs between K_u and K_v; 1 inside an atom."""
    if atoms.n != inst.n:
        raise ValidationError("atoms are over a different vertex count")
    lab = atoms.labels()
    m = len(atoms.clusters)
    member = np.zeros((inst.n, m))
    member[np.arange(inst.n), lab] = 1.0
    sizes = member.sum(axis=0)
    counts = member.T @ inst.adjacency.astype(float) @ member
    frac = counts / np.outer(sizes, sizes)
    w = frac[lab][:, lab]
    same = lab[:, None] == lab[None, :]
    w[same] = 1.0
    return AveragedWeights(w, w.sum(axis=1), sizes[lab].astype(np.int64), lab)


@dataclass(frozen=True)
class PreclusteredInstance:
    base: Instance
    atoms: Clustering
    e_adm: frozenset
    e1: frozenset
    e2: frozenset
    e_adm_raw: frozenset
    eps: float

    def admissible_neighbors(self, u: int) -> set[int]:
        return {b if a == u else a for a, b in self.e_adm if u in (a, b)}

    def atom_compatibility(self) -> list[list[bool]]:
        """compat[g][h]: atoms g and h may share a cluster (all cross pairs admissible)."""
        m = len(self.atoms.clusters)
        lab = self.atoms.labels()
        compat = [[g == h for h in range(m)] for g in range(m)]
        for u, v in self.e_adm:
            compat[lab[u]][lab[v]] = compat[lab[v]][lab[u]] = True
        return compat

    def to_json(self) -> dict:
        return {
            "atoms": self.atoms.to_json()["clusters"],
            "e_adm": [list(p) for p in sorted(self.e_adm)],
            "eps": self.eps,
        }


def build_admissible(inst: Instance, atoms: Clustering, eps: float, demote: bool = True) -> PreclusteredInstance:
    """E1, E2 and the admissible pairs for the averaged instance.

    E1: ``eps·w_v < w_u < w_v/eps``.  E2: same atom, or in E1 with
    ``sum_{p in N1_u ∩ N1_v} w_up·w_vp > eps·(w_u + w_v)``.  Admissible pairs are
    the cross-atom pairs of E2; with ``demote`` an atom pair with any
    non-admissible cross pair loses all of them.
    """
    if not (0.0 < eps < 1.0):
        raise ValidationError(f"eps must lie strictly between 0 and 1, got {eps}")
    aw = averaged_weights(inst, atoms)
    w, wt = aw.w, aw.totals
    e1 = (eps * wt[None, :] < wt[:, None]) & (wt[:, None] < wt[None, :] / eps)
    wn = np.where(e1, w, 0.0)
    common = wn @ wn.T
    same = aw.atom_of[:, None] == aw.atom_of[None, :]
    e2 = same | (e1 & (common > eps * (wt[:, None] + wt[None, :])))
    adm = e2 & ~same
    raw = adm.copy()
    if demote:
        lab = aw.atom_of
        member = np.zeros((inst.n, len(atoms.clusters)))
        member[np.arange(inst.n), lab] = 1.0
        # number of non-admissible cross pairs per atom pair
        blocked = member.T @ (~same & ~adm).astype(float) @ member > 0
        adm &= ~blocked[lab][:, lab]
    return PreclusteredInstance(
        base=inst,
        atoms=atoms,
        e_adm=_pairs_of(adm, include_diagonal=False),
        e1=_pairs_of(e1, include_diagonal=True),
        e2=_pairs_of(e2, include_diagonal=True),
        e_adm_raw=_pairs_of(raw, include_diagonal=False),
        eps=eps,
    )


def precluster(inst: Instance, eps: float, beta: float = DEFAULT_BETA, seed: int = 0,
               start: Clustering | None = None) -> PreclusteredInstance:
    return build_admissible(inst, build_atoms(inst, beta, seed, start), eps)


@dataclass
class AuditReport:
    opt: int
    opt_witness: Clustering
    good_cost: int
    good_witness: Clustering
    num_admissible: int

    @property
    def good_ratio(self) -> float:
        return self.good_cost / self.opt if self.opt else (1.0 if self.good_cost == 0 else float("inf"))

    @property
    def admissible_ratio(self) -> float:
        return self.num_admissible / max(self.opt, 1)

    def to_json(self) -> dict:
        return {
            "opt": self.opt,
            "good_cost": self.good_cost,
            "good_ratio": self.good_ratio,
            "num_admissible": self.num_admissible,
            "admissible_ratio": self.admissible_ratio,
            "good_clustering": self.good_witness.to_json()["clusters"],
        }


def audit_preclustering(inst: Instance, pre: PreclusteredInstance, max_n: int = 12) -> AuditReport:
    """Compare the cheapest good clustering with the unrestricted optimum."""
    opt: OptResult = solve_exact(inst, max_n=max_n)
    good = solve_exact_grouped(inst, pre.atoms, pre.atom_compatibility())
    assert objective_clustering(inst, good.witness) == good.opt_value
    return AuditReport(opt.opt_value, opt.witness, good.opt_value, good.witness, len(pre.e_adm))


def enforce_a1(c: Clustering, pre: PreclusteredInstance, eps1: float) -> Clustering:
    """Split atoms off clusters that are only slightly larger than the atom.

    While some atom K_u sits in a cluster C with ``k_u < |C| <= k_u + eps1·|N_adm(u)|``,
    C is replaced by K_u and C \\ K_u.  Afterwards every atom is either a whole
    cluster or lies in a cluster larger than that bound.
    """
    if c.n != pre.atoms.n:
        raise ValidationError("clustering and preclustering are over different vertex counts")
    atoms = {v: frozenset(k) for k in pre.atoms.clusters for v in k}
    nadm = {v: len(pre.admissible_neighbors(v)) for v in range(c.n)}
    clusters = [frozenset(x) for x in c.clusters]
    changed = True
    while changed:
        changed = False
        for i, cl in enumerate(sorted(clusters, key=min)):
            for u in sorted(cl):
                k = atoms[u]
                if not k <= cl:
                    raise ValidationError(f"clustering breaks the atom containing {u}")
                if len(k) < len(cl) <= len(k) + eps1 * nadm[u]:
                    clusters.remove(cl)
                    clusters.extend([k, cl - k])
                    changed = True
                    break
            if changed:
                break
    return Clustering(tuple(clusters))
