"""Symmetric eigenvalue estimates used for the PSD checks."""

from __future__ import annotations

import numpy as np

JACOBI_MAX_DIM = 64


def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100) -> np.ndarray:
    """Cyclic Jacobi rotations; returns eigenvalues in ascending order."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    a = (a + a.T) / 2
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    scale = max(np.abs(a).max(), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue; Jacobi up to 64x64, LAPACK beyond."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return 0.0
    if a.shape[0] <= JACOBI_MAX_DIM:
        return float(jacobi_eigenvalues(a)[0])
    return float(np.linalg.eigvalsh((a + a.T) / 2)[0])
