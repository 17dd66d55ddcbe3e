"""Welfare-maximising allocation under per-period caps.

The social planner maximises

    sum_i V_i(a_i) - sum_k wholesale[k] * sum_i a_i[k]   s.t.   sum_i a_i[k] <= caps[k]

Dual decomposition: with price ``p = wholesale + xi`` every agent's
Lagrangian subproblem is its own price response, so aggregate demand is
affine in ``xi`` with the summed (negative definite, tridiagonal) response
Jacobian.  Finding ``xi`` is then a linear complementarity problem with an
M-matrix, solved exactly by :mod:`uniprice.lcp`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InfeasibleError, SizeError, SolverError
from .lcp import _solve_principal, solve_lcp
from .model import (Allocation, BidProfile, FloatArray, MarketConfig, make_allocation,
                    population_valuation, population_valuation_gradient, valuation_hessian)
from .price_response import apply_tridiagonal, population_coefficients


@dataclass(frozen=True)
class PlannerSolution:
    allocation: Allocation
    duals: FloatArray
    prices: FloatArray
    welfare: float
    kkt_residual: float

    @property
    def aggregate(self) -> FloatArray:
        return self.allocation.aggregate


def _check_shapes(bids: BidProfile, config: MarketConfig) -> None:
    if bids.horizon != config.horizon:
        raise InputError(f"bids have horizon {bids.horizon}, config has {config.horizon}")


def welfare(bids: BidProfile, config: MarketConfig, actions) -> float:
    """Planner objective at ``actions`` (``(N, K)``)."""
    actions = np.asarray(actions, dtype=float)
    return float(population_valuation(bids, actions).sum() - config.wholesale @ actions.sum(axis=0))


def clearing_prices(diag, off, affine, caps, floor, *, refine: int = 2):
    """Prices ``floor + xi`` solving the cap complementarity for affine demand.

    ``diag``/``off``/``affine`` are per-agent response coefficients.  Returns
    ``(prices, xi, lcp_result)``.
    """
    tot_diag = diag.sum(axis=0)
    tot_off = off.sum(axis=0)
    demand = apply_tridiagonal(diag, off, affine, floor).sum(axis=0)
    q = caps - demand
    res = solve_lcp(-tot_diag, -tot_off, q)
    xi = res.z.copy()
    idx = np.flatnonzero(res.active)
    # polish against the per-agent summed demand actually used downstream
    for _ in range(refine if idx.size else 0):
        slack = caps - apply_tridiagonal(diag, off, affine, floor + xi).sum(axis=0)
        xi[idx] += _solve_principal(-tot_diag, -tot_off, idx, -slack[idx])
    xi = np.maximum(xi, 0.0)
    return floor + xi, xi, res


def solve_social_choice(bids: BidProfile, config: MarketConfig) -> PlannerSolution:
    """Social-choice allocation and cap multipliers for the reported types."""
    _check_shapes(bids, config)
    diag, off, affine = population_coefficients(bids)
    prices, xi, _ = clearing_prices(diag, off, affine, config.caps, config.wholesale)
    actions = apply_tridiagonal(diag, off, affine, prices)
    alloc = make_allocation(bids, actions)
    sol = PlannerSolution(alloc, xi, prices, welfare(bids, config, actions), 0.0)
    resid = kkt_residual(bids, config, sol)
    return PlannerSolution(alloc, xi, prices, sol.welfare, resid)


def kkt_residual(bids: BidProfile, config: MarketConfig, solution: PlannerSolution) -> float:
    """Infinity norm of stationarity, feasibility, sign and complementarity violations.

    Stationarity uses the adjoint gradient of the valuation, not the
    closed-form response.
    """
    _check_shapes(bids, config)
    actions = solution.allocation.actions
    xi = np.asarray(solution.duals, dtype=float)
    if actions.shape != (len(bids), bids.horizon) or xi.shape != (bids.horizon,):
        raise InputError("solution shapes do not match the bids")
    grad = population_valuation_gradient(bids, actions) - (config.wholesale + xi)
    gap = actions.sum(axis=0) - config.caps
    parts = [np.abs(grad).max(), np.maximum(gap, 0.0).max(), np.maximum(-xi, 0.0).max(),
             np.abs(xi * gap).max()]
    return float(max(parts))


@dataclass(frozen=True)
class GridSpec:
    """Per-coordinate grid for the brute-force oracle.

    ``lower``/``upper`` broadcast to ``(N, K)``; ``points`` per action.
    """

    lower: FloatArray
    upper: FloatArray
    points: int = 21

    def axes(self, N: int, K: int):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (N, K))
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (N, K))
        return np.linspace(lo, hi, self.points, axis=-1)  # (N, K, points)

    def spacing(self, N: int, K: int) -> FloatArray:
        ax = self.axes(N, K)
        return ax[..., 1] - ax[..., 0] if self.points > 1 else np.zeros((N, K))


@dataclass(frozen=True)
class BruteForceResult:
    welfare: float
    actions: FloatArray
    spacing: FloatArray
    evaluated: int


MAX_GRID_POINTS = 5_000_000


def brute_force_welfare(bids: BidProfile, config: MarketConfig, grid: GridSpec) -> BruteForceResult:
    """Exhaustive search over a product grid of joint actions.

    Raises SizeError above 3 agents, 3 periods, 21 points per axis or
    ``MAX_GRID_POINTS`` joint points; InfeasibleError when no grid point
    satisfies the caps.
    """
    _check_shapes(bids, config)
    N, K = len(bids), bids.horizon
    if N > 3 or K > 3 or grid.points > 21 or grid.points < 1:
        raise SizeError(f"brute force limited to N<=3, K<=3, points<=21 (got {N}, {K}, {grid.points})")
    per_agent = grid.points ** K
    if per_agent ** N > MAX_GRID_POINTS:
        raise SizeError(f"{per_agent ** N} joint grid points exceed {MAX_GRID_POINTS}")

    axes = grid.axes(N, K)
    combos, values = [], []
    for i in range(N):
        pts = np.array(list(itertools.product(*axes[i])))  # (per_agent, K)
        single = bids.take([i] * per_agent)
        values.append(population_valuation(single, pts) - pts @ config.wholesale)
        combos.append(pts)

    total = values[0]
    agg = combos[0]
    for i in range(1, N):
        total = np.add.outer(total, values[i])
        agg = agg[..., None, :] + combos[i].reshape((1,) * i + (per_agent, K))
    total = total.reshape(-1)
    agg = agg.reshape(-1, K)
    feasible = np.all(agg <= config.caps + 1e-12, axis=1)
    if not feasible.any():
        low = np.min(agg, axis=0)
        raise InfeasibleError("no grid point satisfies the caps",
                              periods=np.flatnonzero(low > config.caps))
    flat = int(np.argmax(np.where(feasible, total, -np.inf)))
    idx = np.unravel_index(flat, (per_agent,) * N)
    best = np.array([combos[i][j] for i, j in enumerate(idx)])
    return BruteForceResult(float(total[flat]), best, grid.spacing(N, K), total.size)


def grid_error_bound(bids: BidProfile, solution: PlannerSolution, spacing) -> float:
    """Welfare lost by the best grid point relative to the optimum.

    Rounding the optimum down to the grid (spacing ``h`` per coordinate, grid
    assumed to cover the optimum) gives a feasible point; concavity and
    stationarity ``grad V_i = wholesale + xi`` bound its loss by
    ``sum_k xi_k sum_i h_ik + 0.5 * lambda_max * ||h||^2``.
    """
    h = np.broadcast_to(np.asarray(spacing, dtype=float), solution.allocation.actions.shape)
    curv = max(float(np.linalg.eigvalsh(-valuation_hessian(bids[i])).max()) for i in range(len(bids)))
    return float(solution.duals @ h.sum(axis=0) + 0.5 * curv * np.sum(h ** 2))


def certify(solution: PlannerSolution, config: MarketConfig, tol: float = 1e-7) -> None:
    """Raise SolverError unless sign, feasibility and slackness hold within ``tol``."""
    gap = solution.aggregate - config.caps
    worst = max(float(np.maximum(-solution.duals, 0).max()), float(np.maximum(gap, 0).max()),
                float(np.abs(solution.duals * gap).max()))
    if worst > tol:
        raise SolverError("planner solution violates complementarity", residual=worst)
