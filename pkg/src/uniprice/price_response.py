"""Price-taking best response of an LQ agent.

Substituting the post-action states ``z[k] = x[k+1]`` makes the utility
separable in ``z``; mapping back through ``a[k] = (z[k] - A z[k-1]) / B[k]``
gives a response that is affine in prices with a symmetric tridiagonal slope:

    mu[k] = diag[k] p[k] + sub[k-1] p[k-1] + super[k] p[k+1] + affine[k]

    diag[k]   = 1 / (2 beta[k] B[k]^2) + A^2 / (2 beta[k-1] B[k]^2)   (k > 0)
    diag[0]   = 1 / (2 beta[0] B[0]^2)
    sub[k-1]  = super[k-1] = -A / (2 beta[k-1] B[k-1] B[k])
    affine[k] = (d[k] - A d[k-1]) / B[k],   d[-1] := x0

``paper_theta1=True`` swaps ``diag[0]`` for ``A / (2 beta[0] B[0]^2)``; that
variant is kept only for side-by-side comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import lsq_linear

from .errors import InputError, SolverError
from .model import (ActionBox, AgentType, BidProfile, FloatArray, TypeBounds, as_vector,
                    impulse_response, valuation_gradient)


@dataclass(frozen=True)
class ResponseCoefficients:
    diag: FloatArray    # (K,)
    sub: FloatArray     # (K-1,), row k+1 / column k
    super: FloatArray   # (K-1,), row k / column k+1
    affine: FloatArray  # (K,)

    @property
    def horizon(self) -> int:
        return self.diag.shape[0]

    def matrix(self) -> FloatArray:
        J = np.diag(self.diag)
        if self.horizon > 1:
            J += np.diag(self.sub, -1) + np.diag(self.super, 1)
        return J


def coefficient_arrays(a, b, beta, d, x0, paper_theta1: bool = False):
    """Vectorised coefficients for ``N`` agents.

    Inputs are ``(N,)`` for ``a``/``x0`` and ``(N, K)`` otherwise.  Works for
    complex dtypes as well, which the report-derivative code relies on.
    Returns ``(diag, off, affine)`` with ``off`` of shape ``(N, K-1)`` holding
    both the sub- and super-diagonal.
    """
    a = a[:, None]
    b2 = b * b
    diag = 1.0 / (2.0 * beta * b2)
    diag[:, 1:] = diag[:, 1:] + a * a / (2.0 * beta[:, :-1] * b2[:, 1:])
    if paper_theta1:
        diag[:, 0] = a[:, 0] / (2.0 * beta[:, 0] * b2[:, 0])
    off = -a / (2.0 * beta[:, :-1] * b[:, :-1] * b[:, 1:])
    prev = np.concatenate([x0[:, None], d[:, :-1]], axis=1)
    affine = (d - a * prev) / b
    return diag, off, affine


def apply_tridiagonal(diag, off, affine, prices):
    """``mu = J p + affine`` row by row for tridiagonal ``J``."""
    mu = diag * prices + affine
    if diag.shape[-1] > 1:
        mu[..., 1:] = mu[..., 1:] + off * prices[:-1]
        mu[..., :-1] = mu[..., :-1] + off * prices[1:]
    return mu


def coefficients(agent: AgentType, *, paper_theta1: bool = False) -> ResponseCoefficients:
    diag, off, affine = coefficient_arrays(
        np.array([agent.a_coef]), agent.b_coefs[None], agent.betas[None],
        agent.targets[None], np.array([agent.x0]), paper_theta1)
    return ResponseCoefficients(diag[0], off[0].copy(), off[0].copy(), affine[0])


def respond(agent: AgentType, prices: ArrayLike, *, paper_theta1: bool = False) -> FloatArray:
    """Closed-form utility-maximising actions at fixed ``prices``."""
    p = as_vector(prices, agent.horizon, "prices")
    c = coefficients(agent, paper_theta1=paper_theta1)
    return apply_tridiagonal(c.diag, c.sub, c.affine, p)


def response_jacobian(agent: AgentType, *, paper_theta1: bool = False) -> FloatArray:
    """``d mu / d p`` as a dense ``(K, K)`` tridiagonal matrix."""
    return coefficients(agent, paper_theta1=paper_theta1).matrix()


def population_coefficients(bids: BidProfile, *, paper_theta1: bool = False):
    return coefficient_arrays(bids.a_coef, bids.b_coefs, bids.betas, bids.targets, bids.x0,
                              paper_theta1)


def population_respond(bids: BidProfile, prices: ArrayLike, *,
                       paper_theta1: bool = False) -> FloatArray:
    """Responses of every agent; returns ``(N, K)``."""
    p = as_vector(prices, bids.horizon, "prices")
    diag, off, affine = population_coefficients(bids, paper_theta1=paper_theta1)
    return apply_tridiagonal(diag, off, affine, p)


def response_report_jacobian(agent: AgentType, prices: ArrayLike, *,
                             paper_theta1: bool = False, step: float = 1e-30) -> FloatArray:
    """``d mu / d r`` at fixed prices, shape ``(K, 3K+1)``, by complex-step.

    Report coordinates follow :meth:`AgentType.report_vector`.
    """
    K = agent.horizon
    p = as_vector(prices, K, "prices")
    base = agent.report_vector().astype(complex)
    L = base.shape[0]
    out = np.empty((K, L))
    for col in range(L):
        r = base.copy()
        r[col] += 1j * step
        diag, off, affine = coefficient_arrays(
            r[:1], r[None, 1:1 + K], r[None, 1 + K:1 + 2 * K], r[None, 1 + 2 * K:],
            np.array([agent.x0], dtype=complex), paper_theta1)
        out[:, col] = apply_tridiagonal(diag, off, affine, p.astype(complex))[0].imag / step
    return out


def response_lipschitz_bound(bounds: TypeBounds, horizon: int) -> float:
    """Sup over the type box of ``||d mu / d p||_inf``.

    Every coefficient magnitude grows with A and shrinks with |B| and |beta|,
    so the supremum sits at :meth:`TypeBounds.extreme_agent`.
    """
    J = response_jacobian(bounds.extreme_agent(horizon))
    return float(np.abs(J).sum(axis=1).max())


def _kkt_violation(grad, a, lo, hi):
    """Projected-gradient residual of a maximisation over a box."""
    res = np.abs(grad)
    at_lo = a <= lo
    at_hi = a >= hi
    res = np.where(at_lo, np.maximum(grad, 0.0), res)
    res = np.where(at_hi, np.maximum(-grad, 0.0), res)
    res = np.where(at_lo & at_hi, 0.0, res)
    return float(res.max()) if res.size else 0.0


def respond_oracle(agent: AgentType, prices: ArrayLike, bounds: ActionBox | None = None, *,
                   tol: float = 1e-10, max_iter: int = 100_000) -> FloatArray:
    """Numerical best response, independent of the closed form.

    The utility is rewritten as a bounded least-squares problem using the
    impulse-response matrix of the dynamics, solved with bounded-variable
    least squares, then certified by its projected-gradient residual
    (relative to the curvature scale).  Raises SolverError if the residual
    stays above ``tol`` after Newton polishing on the free set.
    """
    K = agent.horizon
    p = as_vector(prices, K, "prices")
    if bounds is None:
        bounds = ActionBox.unbounded(K)
    lo, hi = np.asarray(bounds.lower), np.asarray(bounds.upper)
    if lo.shape != (K,):
        raise InputError(f"action box must have length {K}")

    # -U(a) = ||C a - y||^2 + p.a  with  C = S G,  y = S (d - h)
    G, h = impulse_response(agent)
    S = np.sqrt(-agent.betas)
    C = S[:, None] * G
    y = S * (agent.targets - h)
    H = 2.0 * C.T @ C
    scale = max(1.0, float(np.abs(H).sum(axis=1).max()))

    fixed = lo == hi
    a = np.where(fixed, lo, 0.0)
    free = ~fixed
    if free.any():
        # reduced problem ||Cf u - r||^2 + p_f.u  ==  ||R u - e||^2 + const
        r = y - C[:, fixed] @ a[fixed]
        Q, R = np.linalg.qr(C[:, free])
        e = Q.T @ r - 0.5 * np.linalg.solve(R.T, p[free])
        res = lsq_linear(R, e, bounds=(lo[free], hi[free]), method="bvls",
                         tol=1e-15, max_iter=max_iter)
        a[free] = res.x

    grad = valuation_gradient(agent, a) - p
    resid = _kkt_violation(grad, a, lo, hi)
    for _ in range(5):
        if resid <= tol * scale:
            break
        inner = free & (a > lo) & (a < hi)
        if not inner.any():
            break
        step = np.linalg.solve(H[np.ix_(inner, inner)], grad[inner])
        a[inner] = np.clip(a[inner] + step, lo[inner], hi[inner])
        grad = valuation_gradient(agent, a) - p
        resid = _kkt_violation(grad, a, lo, hi)
    if resid > tol * scale:
        raise SolverError("best-response oracle did not certify optimality", residual=resid)
    return a
