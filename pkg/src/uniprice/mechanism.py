"""The uniform-price direct mechanism.

Reports go in; one price per period and every agent's price response at
that price come out.  With linear procurement cost the welfare-maximising
competitive-equilibrium price is the cap-complementarity solution
``p = wholesale + xi``: ``p[k] = wholesale[k]`` where the cap is slack and
aggregate demand equals the cap where ``p[k] > wholesale[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .errors import InputError, SolverError
from .model import Allocation, AgentType, BidProfile, FloatArray, MarketConfig, as_vector, make_allocation
from .planner import clearing_prices, welfare
from .price_response import apply_tridiagonal, population_coefficients, response_report_jacobian

NU_TOL = 1e-7


@dataclass(frozen=True)
class ClearingOutcome:
    prices: FloatArray
    allocation: Allocation
    binding: np.ndarray
    nu_residual: float
    welfare_reported: float

    @property
    def aggregate(self) -> FloatArray:
        return self.allocation.aggregate


def clear(bids: BidProfile, config: MarketConfig, *, paper_theta1: bool = False,
          validate: bool = True) -> ClearingOutcome:
    """Outcome of the mechanism for the reported profile.

    Raises MessageSpaceError for a report outside ``config.type_bounds`` and
    SolverError if the cleared price does not zero the residual map.
    """
    if bids.horizon != config.horizon:
        raise InputError(f"bids have horizon {bids.horizon}, config has {config.horizon}")
    if validate:
        bids.validate(config.type_bounds)
    diag, off, affine = population_coefficients(bids, paper_theta1=paper_theta1)
    prices, xi, lcp = clearing_prices(diag, off, affine, config.caps, config.wholesale)
    actions = apply_tridiagonal(diag, off, affine, prices)
    nu = _nu(prices, actions.sum(axis=0), config, None)
    resid = float(np.abs(nu).max())
    scale = 1.0 + float(np.abs(config.caps).max())
    if not resid <= NU_TOL * scale:
        raise SolverError("cleared prices do not zero the residual map", residual=resid,
                          trace=[resid])
    return ClearingOutcome(prices, make_allocation(bids, actions), xi > 0.0, resid,
                           welfare(bids, config, actions))


def _nu(prices, demand, config, alphas):
    pw, caps = config.wholesale, config.caps
    if alphas is None:
        a1 = a2 = np.ones_like(pw)
    else:
        alphas = np.asarray(alphas, dtype=float)
        a1, a2 = np.broadcast_to(alphas, (config.horizon, 2)).T
        if np.any(a1 <= 0) or np.any(a2 <= 0):
            raise InputError("alphas must be positive")
    # at p == wholesale the branch is chosen by demand, so slack periods give 0
    upper = (prices > pw) | ((prices == pw) & (demand > caps))
    return np.where(upper, a1 * (demand - caps), a2 * (prices - pw))


def nu_residual(prices: ArrayLike, bids: BidProfile, config: MarketConfig,
                alphas: ArrayLike | None = None, *, paper_theta1: bool = False) -> FloatArray:
    """Per-period clearing residual; zero exactly at the mechanism's price.

    ``alphas`` is a ``(K, 2)`` array (or a broadcastable pair) of positive
    scales for the cap branch and the floor branch.
    """
    p = as_vector(prices, config.horizon, "prices")
    diag, off, affine = population_coefficients(bids, paper_theta1=paper_theta1)
    demand = apply_tridiagonal(diag, off, affine, p).sum(axis=0)
    return _nu(p, demand, config, alphas)


@dataclass(frozen=True)
class PriceJacobian:
    """Sensitivity of cleared prices to one agent's report, ``(K, 3K+1)``."""

    finite_difference: FloatArray
    analytic: FloatArray
    differentiable: bool
    binding: np.ndarray

    @property
    def matrix(self) -> FloatArray:
        return self.finite_difference


def analytic_price_jacobian(bids: BidProfile, config: MarketConfig, agent_index: int,
                            outcome: ClearingOutcome | None = None, *,
                            paper_theta1: bool = False) -> FloatArray:
    """Implicit-function Jacobian ``-(dnu/dp)^{-1} dnu/dr`` at the cleared price."""
    if outcome is None:
        outcome = clear(bids, config, paper_theta1=paper_theta1, validate=False)
    K = config.horizon
    diag, off, _ = population_coefficients(bids, paper_theta1=paper_theta1)
    J = np.diag(diag.sum(axis=0))
    if K > 1:
        o = off.sum(axis=0)
        J += np.diag(o, 1) + np.diag(o, -1)
    dmu = response_report_jacobian(bids[agent_index], outcome.prices, paper_theta1=paper_theta1)
    b = outcome.binding
    jac_p = np.where(b[:, None], J, np.eye(K))
    jac_r = np.where(b[:, None], dmu, 0.0)
    return -np.linalg.solve(jac_p, jac_r)


def price_jacobian_wrt_report(bids: BidProfile, config: MarketConfig, agent_index: int, *,
                              step: float = 1e-5, paper_theta1: bool = False) -> PriceJacobian:
    """Central finite differences of the cleared price in each report coordinate.

    ``differentiable`` is False when some probe changes the binding set, in
    which case the finite-difference matrix straddles a kink.
    """
    base = clear(bids, config, paper_theta1=paper_theta1)
    agent = bids[agent_index]
    r0 = agent.report_vector()
    L = r0.shape[0]
    fd = np.empty((config.horizon, L))
    smooth = True
    for col in range(L):
        probes = []
        for sign in (1.0, -1.0):
            r = r0.copy()
            r[col] += sign * step
            shifted = bids.replace(agent_index, AgentType.from_report_vector(r, agent.x0))
            out = clear(shifted, config, paper_theta1=paper_theta1, validate=False)
            smooth &= bool(np.array_equal(out.binding, base.binding))
            probes.append(out.prices)
        fd[:, col] = (probes[0] - probes[1]) / (2.0 * step)
    analytic = analytic_price_jacobian(bids, config, agent_index, base, paper_theta1=paper_theta1)
    return PriceJacobian(fd, analytic, smooth, base.binding)
