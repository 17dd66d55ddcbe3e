"""Active-set solver for tridiagonal linear complementarity problems.

Finds ``z >= 0`` with ``w = M z + q >= 0`` and ``z . w = 0`` where ``M`` is
symmetric tridiagonal.  When ``M`` is a nonsingular M-matrix (positive
definite with non-positive off-diagonals, the market-clearing case) the
monotone active-set sweep terminates in at most ``K`` solves and never
produces a negative ``z``.  Otherwise it falls back to least-index principal
pivoting, which is finite for any P-matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import SolverError


@dataclass(frozen=True)
class LCPResult:
    z: np.ndarray
    w: np.ndarray
    active: np.ndarray  # bool mask of periods with z solved from w == 0
    iterations: int
    method: str


def _solve_principal(diag, off, idx, rhs):
    """Solve ``M[idx, idx] z = rhs`` with the principal submatrix kept banded."""
    n = idx.shape[0]
    ab = np.zeros((3, n))
    ab[1] = diag[idx]
    if n > 1:
        adjacent = np.diff(idx) == 1
        band = np.where(adjacent, off[np.minimum(idx[:-1], off.shape[0] - 1)], 0.0)
        ab[0, 1:] = band
        ab[2, :-1] = band
    return solve_banded((1, 1), ab, rhs)


def _residual(diag, off, z, q):
    w = diag * z + q
    if off.shape[0]:
        w[1:] += off * z[:-1]
        w[:-1] += off * z[1:]
    return w


def _evaluate(diag, off, q, active):
    z = np.zeros_like(q)
    idx = np.flatnonzero(active)
    if idx.size:
        z[idx] = _solve_principal(diag, off, idx, -q[idx])
    return z, _residual(diag, off, z, q)


def solve_lcp(diag, off, q, *, tol: float | None = None, max_iter: int = 10_000) -> LCPResult:
    """Solve the LCP for ``M = tridiag(off, diag, off)``.

    ``tol`` is the slack below which ``w_k`` counts as zero; a period with
    ``w_k`` within ``tol`` of zero stays inactive (``z_k = 0``).
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    q = np.asarray(q, dtype=float)
    K = q.shape[0]
    if tol is None:
        tol = 1e-12 * (1.0 + float(np.abs(q).max(initial=0.0)))

    active = np.zeros(K, dtype=bool)
    z, w = np.zeros(K), q.copy()
    trace = []
    for it in range(K + 1):
        entering = (~active) & (w < -tol)
        trace.append(float(max(-w.min(initial=0.0), 0.0)))
        if not entering.any():
            if np.all(z >= -tol):
                return LCPResult(np.maximum(z, 0.0), w, active, it, "monotone")
            break
        active |= entering
        z, w = _evaluate(diag, off, q, active)
        if np.any(z[active] < -tol):
            break

    # least-index principal pivoting
    active = q < -tol
    for it in range(max_iter):
        z, w = _evaluate(diag, off, q, active)
        bad = (active & (z < -tol)) | (~active & (w < -tol))
        if not bad.any():
            return LCPResult(np.maximum(z, 0.0), w, active, it, "pivoting")
        k = int(np.argmax(bad))
        active[k] = ~active[k]
        trace.append(float(np.abs(np.minimum(z, w)).max()))
    raise SolverError("LCP pivoting did not terminate", residual=trace[-1], trace=trace)
