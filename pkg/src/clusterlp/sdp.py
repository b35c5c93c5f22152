"""Factor-revealing SDP: discretization, corner triangles and Q/F assembly.

Ordered cells ``(I_i, I_j, I_k)`` with ``i <= j <= k`` hold triangles with
``y_uv in I_i, y_uw in I_j, y_vw in I_k``; the y_uvw range of a cell is cut
into sub-intervals.  Each cell is represented by its (at most 16) corners,
and every corner carries one nonnegative variable ``eta``.

For a triangle in a cell, ``C(T)`` holds the three pivot covariances (each
twice) and the Head/Tail index pairs place them into the t x t matrix::

    row 1: (I_i, I_j)   row 2: (I_j, I_i)      pivot u, C = y_uvw - y_uv y_uw
    row 3: (I_i, I_k)   row 4: (I_k, I_i)      pivot v, C = y_uvw - y_uv y_vw
    row 5: (I_j, I_k)   row 6: (I_k, I_j)      pivot w, C = y_uvw - y_uw y_vw

F uses the same placements with value 1.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, product
from pathlib import Path

import numpy as np

from .errors import EmptyCellError, ValidationError
from .instance import SCHEMA_VERSION, Instance
from .linalg import min_eigenvalue
from .rounding import ALG4, RULES, RuleSet
from .triangles import (BudgetSpec, Cell, DegenerateProfile, classify,
                        d_tilde_many, degenerate_cost_and_delta, evaluate)

logger = logging.getLogger(__name__)

DEFAULT_BREAKPOINTS = (
    0.0, 0.05, 0.1, 0.2, 0.3, 0.35, 0.38, 0.39, 0.40, 0.405, 0.41, 0.42, 0.44, 0.45,
    0.5, 0.55, 0.57, 0.58, 0.6, 0.65, 0.7, 0.75, 0.78, 0.8, 0.9, 0.95, 0.96, 0.99, 1.0,
)
DEFAULT_ALPHA = 1.485
KEY_DECIMALS = 12

# Head/Tail coordinate pairs per C row; coordinates 0, 1, 2 = y_uv, y_uw, y_vw
PLACEMENTS = ((0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1))


@dataclass(frozen=True)
class Discretization:
    breakpoints: tuple[float, ...] = DEFAULT_BREAKPOINTS
    wide_box: tuple[float, float] = (0.38, 0.65)
    wide_parts: int = 10
    narrow_box: tuple[float, float] = (0.38, 0.45)
    narrow_parts: int = 20

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size < 2 or bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValidationError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", tuple(float(v) for v in bp))

    @property
    def t(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def lefts(self) -> np.ndarray:
        return np.asarray(self.breakpoints[:-1])

    @property
    def rights(self) -> np.ndarray:
        return np.asarray(self.breakpoints[1:])

    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:]))

    def index(self, y) -> np.ndarray:
        """Interval index of each value: ``[l, r)`` membership, last interval closed."""
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.breakpoints, y, side="right") - 1
        return np.clip(idx, 0, self.t - 1)

    def t_parts(self, i: int, j: int) -> int:
        """Number of y_uvw sub-intervals for a cell whose two smallest intervals are i <= j."""
        lo, hi = self.lefts[i], self.rights[j]
        if lo >= self.narrow_box[0] and hi <= self.narrow_box[1]:
            return self.narrow_parts
        if lo >= self.wide_box[0] and hi <= self.wide_box[1]:
            return self.wide_parts
        return 1

    def t_range(self, i: int, j: int, k: int) -> tuple[float, float]:
        l, r = self.lefts, self.rights
        lo = max(0.0, l[i] + l[j] - 1, l[j] + l[k] - 1, l[i] + l[k] - 1)
        hi = min(r[i], r[j], r[k])
        return float(lo), float(hi)

    def cells(self) -> list[Cell]:
        """All ordered cells with a nonempty y_uvw range, keyed (i, j, k, part)."""
        out = []
        l, r = self.lefts, self.rights
        for i, j, k in _ordered_triples(self.t):
            lo, hi = self.t_range(i, j, k)
            if lo > hi:
                continue
            parts = self.t_parts(i, j)
            edges = np.linspace(lo, hi, parts + 1)
            for p in range(parts):
                out.append(Cell((l[i], l[j], l[k]), (r[i], r[j], r[k]),
                                float(edges[p]), float(edges[p + 1]), (i, j, k, p)))
        return out

    def to_json(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "wide_box": list(self.wide_box), "wide_parts": self.wide_parts,
            "narrow_box": list(self.narrow_box), "narrow_parts": self.narrow_parts,
        }


def _ordered_triples(t: int):
    for i in range(t):
        for j in range(i, t):
            for k in range(j, t):
                yield i, j, k


def default_breakpoints() -> Discretization:
    return Discretization()


def read_breakpoints(path) -> Discretization:
    """Breakpoints from a JSON list or a whitespace/comma separated text file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
        values = data["breakpoints"] if isinstance(data, dict) else data
    except json.JSONDecodeError:
        values = text.replace(",", " ").split()
    try:
        return Discretization(tuple(float(v) for v in values))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: cannot parse breakpoints ({exc})") from exc


# -- corners ------------------------------------------------------------------------

@dataclass(frozen=True)
class CornerSet:
    cell: Cell
    corners: np.ndarray  # (m, 4): y_uv, y_uw, y_vw, y_uvw

    def weights(self, T) -> np.ndarray:
        """Product-form convex weights of point(s) T (..., 4) over the corners."""
        T = np.asarray(T, dtype=float)
        lo = np.array([*self.cell.lo, self.cell.t_lo])
        hi = np.array([*self.cell.hi, self.cell.t_hi])
        span = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (T - lo) / np.where(span > 0, span, 1.0), 0.0)
        w = np.ones(T.shape[:-1] + (self.corners.shape[0],))
        at_hi = (self.corners == hi) & (span > 0)
        for d in range(4):
            fd = frac[..., d, None]
            w = w * np.where(at_hi[:, d], fd, np.where(span[d] > 0, 1.0 - fd, 1.0))
        return w


def corner_triangles(cell: Cell, empty: bool = False) -> CornerSet:
    if empty or cell.t_lo > cell.t_hi:
        raise EmptyCellError(f"cell {cell.key} contains no feasible triangle")
    axes = [sorted({cell.lo[d], cell.hi[d]}) for d in range(3)] + [sorted({cell.t_lo, cell.t_hi})]
    return CornerSet(cell, np.array(list(product(*axes)), dtype=float))


def c_vector(T) -> np.ndarray:
    """The six diagonal entries of C(T) for point(s) T (..., 4)."""
    T = np.asarray(T, dtype=float)
    a, b, c, t = T[..., 0], T[..., 1], T[..., 2], T[..., 3]
    cu, cv, cw = t - a * b, t - a * c, t - b * c
    return np.stack([cu, cu, cv, cv, cw, cw], axis=-1)


# -- model ---------------------------------------------------------------------------

@dataclass
class SdpModel:
    disc: Discretization
    alpha: float
    rules: RuleSet
    cells: list[Cell]
    cell_d: np.ndarray  # certified d-tilde per kept cell
    var_point: np.ndarray  # (m, 4) corner of each eta
    var_cell: np.ndarray  # (m,) index into cells of the representative
    objective: np.ndarray  # (m,) d-tilde of the representative cell
    q_entries: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]  # var, i, j, value with i <= j
    f_entries: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    empty_cells: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return self.var_point.shape[0]

    def var_index(self) -> dict:
        return {_point_key(p): k for k, p in enumerate(self.var_point)}

    def matrices(self, eta) -> tuple[np.ndarray, np.ndarray]:
        eta = self.check_eta(eta)
        return (_scatter(self.q_entries, eta, self.disc.t), _scatter(self.f_entries, eta, self.disc.t))

    def check_eta(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (self.num_vars,):
            raise ValidationError(f"eta has {eta.size} entries, model has {self.num_vars} variables")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValidationError("eta must be finite and nonnegative")
        return eta

    def sidecar(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "alpha": self.alpha,
            "rules": self.rules.to_json(),
            "discretization": self.disc.to_json(),
            "empty_cells": self.empty_cells,
            "variables": [
                {"index": k, "cell": list(self.cells[c].key), "corner": [float(v) for v in p],
                 "d_tilde": float(d)}
                for k, (p, c, d) in enumerate(zip(self.var_point, self.var_cell, self.objective))
            ],
            **self.meta,
        }


def _point_key(p) -> tuple:
    return tuple(round(float(v), KEY_DECIMALS) + 0.0 for v in p)


def _scatter(entries, eta, t) -> np.ndarray:
    var, i, j, val = entries
    M = np.zeros((t, t))
    np.add.at(M, (i, j), eta[var] * val)
    off = i != j
    np.add.at(M, (j[off], i[off]), eta[var[off]] * val[off])
    return M


def _placement_entries(var, idx, values, t):
    """Upper-triangle entries of sum_r Head_r^T values_r Tail_r for each variable.

    ``idx`` (m, 3) interval indices of the cell; ``values`` (m, 6) C rows.
    """
    rows, cols, vals, vars_ = [], [], [], []
    for r, (h, s) in enumerate(PLACEMENTS):
        rows.append(idx[:, h])
        cols.append(idx[:, s])
        vals.append(values[:, r])
        vars_.append(var)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    vals, vars_ = np.concatenate(vals), np.concatenate(vars_)
    # rows 2r and 2r+1 are mirror images: keep the upper triangle only
    keep = rows <= cols
    rows, cols, vals, vars_ = rows[keep], cols[keep], vals[keep], vars_[keep]
    # merge duplicates (var, i, j)
    key = (vars_.astype(np.int64) * t + rows) * t + cols
    uniq, inv = np.unique(key, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inv, vals)
    v = uniq // (t * t)
    i = (uniq // t) % t
    j = uniq % t
    return v.astype(np.int64), i.astype(np.int64), j.astype(np.int64), merged


def _d_tilde_job(args):
    cells, rules, alpha, tol = args
    return d_tilde_many(cells, rules, BudgetSpec(alpha), tol=tol)


def compute_d_tilde(cells: list[Cell], rules: RuleSet, alpha: float, tol: float = 2e-3,
                    workers: int = 1, chunk: int = 256):
    chunks = [cells[s:s + chunk] for s in range(0, len(cells), chunk)]
    jobs = [(c, rules, alpha, tol) for c in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_d_tilde_job, jobs))
    else:
        parts = [_d_tilde_job(j) for j in jobs]
    return [r for part in parts for r in part]


def assemble_matrices(disc: Discretization | None = None, rules: RuleSet = ALG4,
                      alpha: float = DEFAULT_ALPHA, d_tilde: dict | None = None,
                      tol: float = 2e-3, workers: int = 1) -> SdpModel:
    """Build the coalesced SDP model.

    ``d_tilde`` may map cell keys to precomputed values; otherwise the
    certified lower bounds are computed here.  A nonempty cell without a
    value is an error.
    """
    disc = disc or default_breakpoints()
    cells = disc.cells()
    if d_tilde is None:
        res = compute_d_tilde(cells, rules, alpha, tol, workers)
        keep = [k for k, r in enumerate(res) if not r.empty]
        d_vals = {cells[k].key: res[k].lower for k in keep}
        meta = {"d_tilde_max_gap": float(max((res[k].gap for k in keep), default=0.0)),
                "d_tilde_tol": tol}
    else:
        d_vals = dict(d_tilde)
        keep = [k for k, c in enumerate(cells) if c.key in d_vals]
        missing = [c.key for c in cells if c.key not in d_vals]
        if missing:
            raise ValidationError(f"missing d-tilde for {len(missing)} cells, e.g. {missing[0]}")
        meta = {}
    empty = len(cells) - len(keep)
    kept = [cells[k] for k in keep]
    if not kept:
        raise ValidationError("discretization has no nonempty cell")
    cell_d = np.array([d_vals[c.key] for c in kept], dtype=float)
    if not np.all(np.isfinite(cell_d)):
        raise ValidationError("non-finite d-tilde value")

    # coalesce corners: one variable per distinct point, owned by the cell with largest d-tilde
    best: dict = {}
    for ci, cell in enumerate(kept):
        for p in corner_triangles(cell).corners:
            key = _point_key(p)
            cur = best.get(key)
            if cur is None or cell_d[ci] > cell_d[cur[0]] or (cell_d[ci] == cell_d[cur[0]] and ci < cur[0]):
                best[key] = (ci, p)
    order = sorted(best)
    var_cell = np.array([best[k][0] for k in order], dtype=np.int64)
    var_point = np.array([best[k][1] for k in order], dtype=float)
    objective = cell_d[var_cell]

    idx = np.array([(c.key[0], c.key[1], c.key[2]) for c in kept], dtype=np.int64)[var_cell]
    var = np.arange(len(order), dtype=np.int64)
    q = _placement_entries(var, idx, c_vector(var_point), disc.t)
    f = _placement_entries(var, idx, np.ones((len(order), 6)), disc.t)
    model = SdpModel(disc, float(alpha), rules, kept, cell_d, var_point, var_cell, objective, q, f,
                     empty_cells=empty, meta=meta)
    logger.info("SDP model: %d cells (%d empty), %d variables", len(kept), empty, model.num_vars)
    return model


# -- SDPA sparse format ------------------------------------------------------------

@dataclass
class SdpaData:
    m: int
    block_struct: tuple[int, ...]
    c: np.ndarray
    entries: list[tuple[int, int, int, int, float]]  # matno, block, i, j, value (1-based, i <= j)

    def block_matrix(self, eta, block: int) -> np.ndarray:
        """sum_k eta_k F_k - F_0 for a matrix block."""
        size = abs(self.block_struct[block - 1])
        M = np.zeros((size, size))
        for mat, blk, i, j, val in self.entries:
            if blk != block:
                continue
            coef = -1.0 if mat == 0 else eta[mat - 1]
            M[i - 1, j - 1] += coef * val
            if i != j:
                M[j - 1, i - 1] += coef * val
        return M


def sdpa_entries(model: SdpModel) -> list[tuple[int, int, int, int, float]]:
    m = model.num_vars
    out = []
    for blk, (var, i, j, val) in ((1, model.q_entries), (2, model.f_entries)):
        for v, a, b, x in zip(var.tolist(), i.tolist(), j.tolist(), val.tolist()):
            if x != 0.0:
                out.append((v + 1, blk, a + 1, b + 1, x))
    # LP block: eta_k >= 0, sum eta >= 1, -sum eta >= -1
    out.append((0, 3, m + 1, m + 1, 1.0))
    out.append((0, 3, m + 2, m + 2, -1.0))
    for k in range(m):
        out.append((k + 1, 3, k + 1, k + 1, 1.0))
        out.append((k + 1, 3, m + 1, m + 1, 1.0))
        out.append((k + 1, 3, m + 2, m + 2, -1.0))
    out.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    return out


def emit_sdpa(model: SdpModel, path, sidecar: bool = True) -> Path:
    """Write ``model`` as SDPA sparse (.dat-s); the eta map goes to ``<path>.json``."""
    if model is None or model.num_vars == 0:
        raise ValidationError("cannot emit an empty model")
    path = Path(path)
    t, m = model.disc.t, model.num_vars
    lines = [
        f'"factor-revealing SDP: alpha={model.alpha!r} rules={model.rules.name} vars={m}"',
        f"{m} = mDIM",
        "3 = nBLOCK",
        f"{t} {t} {-(m + 2)} = blockStruct",
        " ".join(f"{v:.17g}" for v in model.objective),
    ]
    lines.extend(f"{a} {b} {i} {j} {v:.17g}" for a, b, i, j, v in sdpa_entries(model))
    path.write_text("\n".join(lines) + "\n")
    if sidecar:
        Path(str(path) + ".json").write_text(json.dumps(model.sidecar(), indent=1))
    return path


def read_sdpa(path) -> SdpaData:
    """Parse a sparse SDPA file (comments in quotes or after '*', '=' annotations allowed)."""
    tokens_lines = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("*", 1)[0].strip()
        if not line or line.startswith('"'):
            continue
        line = line.split("=", 1)[0]
        for ch in "{}(),":
            line = line.replace(ch, " ")
        if line.strip():
            tokens_lines.append((lineno, line.split()))
    try:
        m = int(tokens_lines[0][1][0])
        nblock = int(tokens_lines[1][1][0])
        block_struct = tuple(int(v) for v in tokens_lines[2][1][:nblock])
        c_tokens, pos = [], 3
        while len(c_tokens) < m:
            c_tokens.extend(tokens_lines[pos][1])
            pos += 1
        c = np.array([float(v) for v in c_tokens[:m]])
        entries = []
        for lineno, toks in tokens_lines[pos:]:
            mat, blk, i, j = (int(v) for v in toks[:4])
            entries.append((mat, blk, i, j, float(toks[4])))
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed SDPA file ({exc})") from exc
    return SdpaData(m, block_struct, c, entries)


# -- evaluation of external eta ---------------------------------------------------------

@dataclass
class EtaEvaluation:
    objective: float
    min_eig_q: float
    min_eig_f: float
    eta_sum: float

    def to_json(self) -> dict:
        return {"objective": self.objective, "min_eig_Q": self.min_eig_q,
                "min_eig_F": self.min_eig_f, "eta_sum": self.eta_sum}


def evaluate_eta(model, eta) -> EtaEvaluation:
    """Objective and PSD diagnostics of ``eta`` for an SdpModel or parsed SDPA file."""
    if isinstance(model, SdpaData):
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (model.m,):
            raise ValidationError(f"eta has {eta.size} entries, model has {model.m} variables")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValidationError("eta must be finite and nonnegative")
        Q, F = model.block_matrix(eta, 1), model.block_matrix(eta, 2)
        obj = float(model.c @ eta)
    else:
        Q, F = model.matrices(eta)
        eta = np.asarray(eta, dtype=float)
        obj = float(model.objective @ eta)
    return EtaEvaluation(obj, min_eigenvalue(Q), min_eigenvalue(F), float(eta.sum()))


def read_eta(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    values = data["eta"] if isinstance(data, dict) else data
    try:
        return np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: eta must be a list of numbers") from exc


# -- triangle census ----------------------------------------------------------------

@dataclass
class TriangleCensus:
    """All triangles of an LP solution in ordered form, plus degenerate stand-ins.

    ``points`` rows are (y_uv, y_uw, y_vw, y_uvw) with y_uv <= y_uw <= y_vw and
    ``signs`` the matching pattern.  ``kind`` is 0 for triples, 1 for pairs.
    ``t3_extra`` = n/6 extra copies of (1, 1, 1, 1).
    """

    n: int
    points: np.ndarray
    signs: list[str]
    kind: np.ndarray
    t3_extra: float

    @property
    def normalizer(self) -> float:
        n = self.n
        return n * (n - 1) * (n + 1) / 6 + n / 6


def triangle_census(sol, inst: Instance | None = None) -> TriangleCensus:
    n = sol.n
    Y = sol.y_pair_matrix
    Y3 = sol.y_triple_tensor
    adj = inst.adjacency if inst is not None else np.zeros((n, n), dtype=bool)
    pts, signs, kind = [], [], []
    for u, v, w in combinations(range(n), 3):
        vals = [(Y[u, v], adj[u, v]), (Y[u, w], adj[u, w]), (Y[v, w], adj[v, w])]
        vals.sort(key=lambda e: e[0])
        pts.append((vals[0][0], vals[1][0], vals[2][0], Y3[u, v, w]))
        signs.append("".join("+" if s else "-" for _, s in vals))
        kind.append(0)
    for u, v in combinations(range(n), 2):
        y = Y[u, v]
        pts.append((y, y, 1.0, y))
        signs.append("+++" if adj[u, v] else "--+")
        kind.append(1)
    return TriangleCensus(n, np.array(pts, dtype=float).reshape(-1, 4), signs,
                          np.array(kind, dtype=np.int64), n / 6)


def census_matrices(census: TriangleCensus, disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """Q and F from the exact census through Head/C/Tail, with the n/6 copies of (1,1,1,1)."""
    pts = np.vstack([census.points, [[1.0, 1.0, 1.0, 1.0]]])
    weight = np.r_[np.ones(census.points.shape[0]), census.t3_extra]
    idx = disc.index(pts[:, :3])
    var = np.arange(pts.shape[0])
    q = _placement_entries(var, idx, c_vector(pts), disc.t)
    f = _placement_entries(var, idx, np.ones((pts.shape[0], 6)), disc.t)
    return _scatter(q, weight, disc.t), _scatter(f, weight, disc.t)


def direct_matrices(sol, disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """sum_u Q_u and sum_u F_u computed from the pair and triple statistics."""
    Y = sol.y_pair_matrix
    Y3 = sol.y_triple_tensor
    n, t = sol.n, disc.t
    Q = np.zeros((t, t))
    F = np.zeros((t, t))
    for u in range(n):
        H = np.zeros((n, t))
        H[np.arange(n), disc.index(Y[u])] = 1.0
        cov = Y3[u] - np.outer(Y[u], Y[u])
        Q += H.T @ cov @ H
        freq = H.sum(axis=0)
        F += np.outer(freq, freq)
    return Q, F


def census_eta(model: SdpModel, census: TriangleCensus, strict: bool = False) -> tuple[np.ndarray, int]:
    """Map census triangles to corner weights of the model; returns (eta, unmapped count).

    Each triangle is located in its cell (interval indices and y_uvw part),
    spread over the cell corners with the product-form weights, and every
    corner is credited to its coalesced variable.
    """
    disc = model.disc
    lookup = model.var_index()
    cell_of = {c.key: c for c in model.cells}
    pts = np.vstack([census.points, [[1.0, 1.0, 1.0, 1.0]]])
    weight = np.r_[np.ones(census.points.shape[0]), census.t3_extra]
    eta = np.zeros(model.num_vars)
    idx = disc.index(pts[:, :3])
    missed = 0
    for p, w, (i, j, k) in zip(pts, weight, idx.tolist()):
        lo, hi = disc.t_range(i, j, k)
        parts = disc.t_parts(i, j)
        frac = 0.0 if hi <= lo else (p[3] - lo) / (hi - lo)
        part = int(np.clip(np.floor(frac * parts), 0, parts - 1))
        cell = cell_of.get((i, j, k, part))
        if cell is None:
            missed += 1
            if strict:
                raise ValidationError(f"triangle {p.tolist()} falls in no model cell")
            continue
        q = p.copy()
        q[3] = np.clip(q[3], cell.t_lo, cell.t_hi)
        cs = corner_triangles(cell)
        lam = cs.weights(q)
        for corner, l in zip(cs.corners, lam):
            if l != 0.0:
                eta[lookup[_point_key(corner)]] += w * l
    return eta / census.normalizer, missed


def census_objective(census: TriangleCensus, rules: RuleSet, alpha: float) -> float:
    """Normalized sum of delta - cost over the census (degenerate pairs evaluated directly)."""
    budgets = BudgetSpec(alpha)
    total = 0.0
    tri = census.kind == 0
    if tri.any():
        pts = census.points[tri]
        for pattern in set(np.array(census.signs)[tri]):
            sel = np.array([s == pattern for s in np.array(census.signs)[tri]])
            plus = np.array([ch == "+" for ch in pattern])
            y = pts[sel, :3]
            c, d = evaluate(plus, classify(plus, y, rules), y, pts[sel, 3], rules, budgets)
            total += float(np.sum(d - c))
    for p, s in zip(census.points[~tri], np.array(census.signs)[~tri]):
        c, d = degenerate_cost_and_delta(DegenerateProfile("+" if s == "+++" else "-", float(np.clip(p[0], 0, 1))),
                                         rules, budgets)
        total += d - c
    return total / census.normalizer


def rules_by_name(name: str) -> RuleSet:
    try:
        return RULES[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown rule set {name!r}; choose from {sorted(RULES)}") from None
