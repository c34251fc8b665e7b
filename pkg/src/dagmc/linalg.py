"""Dense small-matrix helpers for proposal shapes.

Everything here works on plain ``numpy`` arrays.  Lower-triangular factors
are stored as full ``(d, d)`` arrays with a zero strict upper part.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "NotPositiveDefinite",
    "DimensionMismatch",
    "chol_factor",
    "rank1_update",
    "tri_matvec",
    "tri_solve",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a matrix fails the scaled pivot test of the factorization."""


class DimensionMismatch(ValueError):
    pass


def _check_square(C):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {C.shape}")
    return C


def chol_factor(C) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L @ L.T == C``.

    A pivot ``L[k, k]**2`` no larger than ``d * eps * max(diag(C))`` is
    treated as a failure, so nearly singular covariances are rejected even
    when LAPACK would still return a factor.
    """
    C = _check_square(C)
    d = C.shape[0]
    diag_max = float(np.max(np.diag(C)))
    if not diag_max > 0.0:
        raise NotPositiveDefinite("non-positive diagonal")
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    tol = d * np.finfo(float).eps * diag_max
    pivots = np.diag(L) ** 2
    if np.any(~(pivots > tol)):
        k = int(np.argmin(pivots))
        raise NotPositiveDefinite(f"pivot {k} is {pivots[k]:.3g} (tolerance {tol:.3g})")
    return L


def rank1_update(L, beta: float, w: float, v, flops: list | None = None) -> np.ndarray:
    """Return ``L'`` with ``L' L'^T = beta * L L^T + w * v v^T``.

    Uses the rotation-based update of the LINPACK ``dchud`` family on
    ``sqrt(beta) * L`` and ``sqrt(w) * v``, so the cost is ``O(d^2)``.

    Parameters
    ----------
    L : (d, d) array
        Lower-triangular factor with positive diagonal.  Not modified.
    beta : float
        Positive scale of the old matrix.
    w : float
        Non-negative weight of the rank-one term.
    v : (d,) array
    flops : list, optional
        One-element list; the number of floating point operations performed
        is added to ``flops[0]``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if w < 0:
        raise ValueError("downdates (w < 0) are not supported")
    L = np.asarray(L, dtype=float)
    d = L.shape[0]
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != d:
        raise DimensionMismatch(f"vector of length {v.shape[0]} for a {d}x{d} factor")

    count = d * (d + 1) // 2 if beta != 1.0 else 0
    out = L * math.sqrt(beta) if beta != 1.0 else L.copy()
    if w == 0.0:
        if flops is not None:
            flops[0] += count
        return out

    x = v * math.sqrt(w)
    count += d
    for k in range(d):
        lkk = out[k, k]
        xk = x[k]
        r = math.hypot(lkk, xk)
        c = r / lkk
        s = xk / lkk
        out[k, k] = r
        count += 7
        if k + 1 < d:
            col = out[k + 1:, k]
            col += s * x[k + 1:]
            col /= c
            x[k + 1:] *= c
            x[k + 1:] -= s * col
            count += 6 * (d - k - 1)
    if flops is not None:
        flops[0] += count
    return out


def tri_matvec(L, w) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    w = np.asarray(w, dtype=float).reshape(-1)
    if L.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"vector of length {w.shape[0]} for a {L.shape[0]}x{L.shape[1]} factor")
    return L @ w


def tri_solve(L, b) -> np.ndarray:
    """Forward substitution: solve ``L x = b`` for lower-triangular ``L``."""
    L = np.asarray(L, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if L.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"vector of length {b.shape[0]} for a {L.shape[0]}x{L.shape[1]} factor")
    return solve_triangular(L, b, lower=True, check_finite=False)
