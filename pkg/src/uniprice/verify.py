"""Invariant checks run by ``uniprice verify`` on one scenario."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import SearchSpec, best_deviation, check_implementation, estimate_constants
from .errors import SolverError
from .mechanism import clear, nu_residual
from .model import BidProfile, simulate_population, valuation_gradient
from .planner import solve_social_choice
from .price_response import respond, respond_oracle, response_jacobian
from .scenario import ScenarioSpec, generate_population


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def run_checks(spec: ScenarioSpec, *, bids: BidProfile | None = None, tolerance: float | None = None,
               paper_theta1: bool = False, max_agents: int = 20,
               budget: int = 50) -> list[CheckResult]:
    """Evaluate the module invariants; each value must not exceed its tolerance.

    ``bids`` overrides the population drawn from ``spec``.
    """
    def tol(default):
        return default if tolerance is None else tolerance

    cfg = spec.config
    if bids is None:
        bids = generate_population(spec)
    sample = range(min(max_agents, len(bids)))
    out = clear(bids, cfg, paper_theta1=paper_theta1)
    plan = solve_social_choice(bids, cfg)
    checks = []

    states = simulate_population(bids, out.allocation.actions)
    checks.append(CheckResult("dynamics_consistency",
                              float(np.abs(states - out.allocation.states).max()), 1e-12))

    gap = 0.0
    foc = 0.0
    for i in sample:
        a = respond(bids[i], out.prices, paper_theta1=paper_theta1)
        try:
            gap = max(gap, float(np.abs(a - respond_oracle(bids[i], out.prices)).max()))
        except SolverError as exc:
            gap = max(gap, float("inf") if np.isnan(exc.residual) else exc.residual)
        foc = max(foc, float(np.abs(valuation_gradient(bids[i], a) - out.prices).max()))
    checks.append(CheckResult("oracle_equivalence", gap, tol(1e-6)))
    checks.append(CheckResult("foc_residual", foc, tol(1e-8)))

    neg = max(float(np.linalg.eigvalsh(response_jacobian(bids[i])).max()) for i in sample)
    # strictly negative: the tolerance is the smallest negative float
    checks.append(CheckResult("response_max_eigenvalue", neg, -np.finfo(float).tiny))

    checks.append(CheckResult("planner_kkt_residual", plan.kkt_residual, tol(1e-7)))
    implementable = max(
        float(np.abs(plan.allocation.actions[i] - respond(bids[i], plan.prices)).max())
        for i in range(len(bids)))
    checks.append(CheckResult("uniform_price_implementable", implementable, tol(1e-6)))

    agg = out.aggregate
    slack = ~out.binding
    comp = max(float(np.abs(out.prices - cfg.wholesale)[slack].max(initial=0.0)),
               float(np.maximum(agg - cfg.caps, 0.0)[slack].max(initial=0.0)),
               float(np.abs(agg - cfg.caps)[out.binding].max(initial=0.0)),
               float(np.maximum(cfg.wholesale - out.prices, 0.0).max()))
    checks.append(CheckResult("complementarity", comp, tol(1e-7)))
    checks.append(CheckResult("nu_residual",
                              float(np.abs(nu_residual(out.prices, bids, cfg,
                                                       paper_theta1=paper_theta1)).max()),
                              tol(1e-7)))

    impl = check_implementation(bids, cfg, paper_theta1=paper_theta1)
    checks.append(CheckResult("implementation_gap", impl.gap, tol(1e-6)))
    checks.append(CheckResult("welfare_relative_gap", impl.welfare_gap, tol(1e-6)))

    again = clear(bids, cfg, paper_theta1=paper_theta1)
    same = (np.array_equal(again.prices, out.prices)
            and np.array_equal(again.allocation.actions, out.allocation.actions))
    checks.append(CheckResult("determinism", 0.0 if same else 1.0, 0.0))

    dev = best_deviation(bids[0], bids, cfg, SearchSpec(budget, spec.seed), 0,
                         paper_theta1=paper_theta1)
    consts = estimate_constants(cfg, bids, eps1=dev.price_shift)
    checks.append(CheckResult("epsilon_ic_bound", dev.gain - consts.eps_bound, 1e-6))
    return checks
