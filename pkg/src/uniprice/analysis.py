"""Empirical incentive and price-impact analysis of the mechanism.

Misreports are sampled, never optimised: the truthful report is always the
first sample, so measured gains are lower bounds on the true worst case and
are compared only against upper bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .errors import InputError
from .mechanism import clear, price_jacobian_wrt_report
from .model import AgentType, BidProfile, FloatArray, MarketConfig, TypeBounds, utility
from .planner import solve_social_choice
from .price_response import response_lipschitz_bound
from .scenario import draw_agent


# ---------------------------------------------------------------------------
# interval arithmetic for the Lipschitz bounds

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @staticmethod
    def of(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        if isinstance(x, tuple):
            return Interval(float(x[0]), float(x[1]))
        return Interval(float(x), float(x))

    def __add__(self, other):
        o = Interval.of(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-Interval.of(other))

    def __rsub__(self, other):
        return Interval.of(other) - self

    def __mul__(self, other):
        o = Interval.of(other)
        c = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(c), max(c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Interval.of(other)
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionError("interval divisor contains zero")
        return self * Interval(1.0 / o.hi, 1.0 / o.lo)

    def __rtruediv__(self, other):
        return Interval.of(other) / self

    def sq(self) -> "Interval":
        if self.lo >= 0:
            return Interval(self.lo ** 2, self.hi ** 2)
        if self.hi <= 0:
            return Interval(self.hi ** 2, self.lo ** 2)
        return Interval(0.0, max(self.lo ** 2, self.hi ** 2))

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))


def response_box(bounds: TypeBounds, price_lo, price_hi) -> list[Interval]:
    """Per-period enclosure of every price response over types x prices."""
    A, B, beta = Interval.of(bounds.a), Interval.of(bounds.b), Interval.of(bounds.beta)
    d, x0 = Interval.of(bounds.d), Interval.of(bounds.x0)
    P = [Interval(float(lo), float(hi)) for lo, hi in zip(price_lo, price_hi)]
    K = len(P)
    B2 = B.sq()
    off = -A / (2.0 * beta * (B * B))
    out = []
    for k in range(K):
        diag = 1.0 / (2.0 * beta * B2)
        if k > 0:
            diag = diag + A.sq() / (2.0 * beta * B2)
        mu = diag * P[k] + (d - A * (x0 if k == 0 else d)) / B
        if k > 0:
            mu = mu + off * P[k - 1]
        if k < K - 1:
            mu = mu + off * P[k + 1]
        out.append(mu)
    return out


def utility_gradient_box(bounds: TypeBounds, actions: list[Interval], price_lo, price_hi):
    """Enclosures of ``dU/da_k`` for any true type, action and price in the boxes."""
    A, B, beta = Interval.of(bounds.a), Interval.of(bounds.b), Interval.of(bounds.beta)
    d, x = Interval.of(bounds.d), Interval.of(bounds.x0)
    K = len(actions)
    dev = []
    for k in range(K):
        x = A * x + B * actions[k]
        dev.append(x - d)
    grads = [None] * K
    lam = Interval(0.0, 0.0)
    for k in range(K - 1, -1, -1):
        lam = 2.0 * beta * dev[k] + A * lam
        grads[k] = B * lam - Interval(float(price_lo[k]), float(price_hi[k]))
    return grads


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviationReport:
    agent_index: int
    best_misreport: AgentType
    truthful_utility: float
    best_deviation_utility: float
    gain: float
    price_shift: float
    samples: int = 0
    kinks: int = 0  # samples whose binding set differs from the truthful one
    smooth_price_shift: float = 0.0  # largest shift over samples without a kink


@dataclass(frozen=True)
class ConstantEstimates:
    c1: float
    c2: float
    c3: float
    c4: float
    eps1: float
    eps_bound: float
    price_box: tuple[FloatArray, FloatArray] = field(repr=False, default=None)


@dataclass(frozen=True)
class SearchSpec:
    """Misreport sampling budget over the message space.

    Samples are, in order: the truth, each report coordinate pushed to its
    lower and upper bound, the two extreme corners, then scrambled Halton
    points over the whole box.  Any budget takes a prefix of this sequence.
    """

    budget: int = 500
    seed: int = 0


def misreport_samples(truth: AgentType, bounds: TypeBounds, search: SearchSpec) -> list[AgentType]:
    if search.budget < 1:
        raise InputError("search budget must be at least 1")
    r0 = truth.report_vector()
    lo, hi = bounds.report_box(truth.horizon)
    vecs = [r0]
    for j in range(r0.shape[0]):
        for edge in (lo[j], hi[j]):
            r = r0.copy()
            r[j] = edge
            vecs.append(r)
    vecs += [lo.copy(), hi.copy()]
    rest = search.budget - len(vecs)
    if rest > 0:
        halton = qmc.Halton(d=r0.shape[0], scramble=True, seed=search.seed)
        vecs += list(qmc.scale(halton.random(rest), lo, hi) if np.all(hi > lo)
                     else lo + (hi - lo) * halton.random(rest))
    return [AgentType.from_report_vector(v, truth.x0) for v in vecs[:search.budget]]


def induced_utility(truth: AgentType, bids: BidProfile, config: MarketConfig, agent_index: int, *,
                    paper_theta1: bool = False) -> float:
    """True utility of agent ``agent_index`` at the mechanism outcome for ``bids``."""
    out = clear(bids, config, paper_theta1=paper_theta1)
    return utility(truth, out.allocation.actions[agent_index], out.prices)


def best_deviation(truth: AgentType, bids: BidProfile, config: MarketConfig, search: SearchSpec,
                   agent_index: int = 0, *, paper_theta1: bool = False) -> DeviationReport:
    """Best sampled misreport of ``agent_index`` with the other reports held fixed.

    ``bids[agent_index]`` is overwritten by ``truth`` for the baseline.
    """
    samples = misreport_samples(truth, config.type_bounds, search)
    base = bids.replace(agent_index, truth)
    ref = clear(base, config, paper_theta1=paper_theta1)
    u_true = utility(truth, ref.allocation.actions[agent_index], ref.prices)
    best_u, best_r, shift, smooth, kinks = u_true, truth, 0.0, 0.0, 0
    for r in samples[1:]:
        out = clear(base.replace(agent_index, r), config, paper_theta1=paper_theta1)
        u = utility(truth, out.allocation.actions[agent_index], out.prices)
        moved = float(np.abs(out.prices - ref.prices).max())
        shift = max(shift, moved)
        if np.array_equal(out.binding, ref.binding):
            smooth = max(smooth, moved)
        else:
            kinks += 1
        if u > best_u:
            best_u, best_r = u, r
    return DeviationReport(agent_index, best_r, u_true, best_u, best_u - u_true, shift,
                           len(samples), kinks, smooth)


def estimate_constants(config: MarketConfig, scenario: BidProfile, *, eps1: float | None = None,
                       probe_agents: Sequence[int] | None = None) -> ConstantEstimates:
    """Lipschitz constants and the incentive bound ``K (c1 c3 + c2) eps1``.

    ``c1`` and ``c2`` are per-period averages: over the domain below,
    ``|U(a, p) - U(a', p')| <= K (c1 |a - a'|_inf + c2 |p - p'|_inf)``.
    The domain is every type in ``config.type_bounds``, every price in
    ``[wholesale, cleared + eps1]`` and every response to those prices.

    Without ``eps1`` the price shift is linearised from finite-difference
    price Jacobians of the probe agents (default: up to the first three)
    times the largest admissible report change per coordinate.
    """
    K, N = config.horizon, len(scenario)
    bounds = config.type_bounds
    c3 = response_lipschitz_bound(bounds, K)
    outcome = clear(scenario, config)
    if eps1 is None:
        eps1 = 0.0
        lo, hi = bounds.report_box(K)
        for i in (probe_agents if probe_agents is not None else range(min(3, N))):
            jac = price_jacobian_wrt_report(scenario, config, i).finite_difference
            r = scenario[i].report_vector()
            reach = np.maximum(hi - r, r - lo)
            eps1 = max(eps1, float((np.abs(jac) @ reach).max()))
    p_lo = np.array(config.wholesale)
    p_hi = np.maximum(outcome.prices, p_lo) + eps1
    acts = response_box(bounds, p_lo, p_hi)
    grads = utility_gradient_box(bounds, acts, p_lo, p_hi)
    c1 = sum(g.mag() for g in grads) / K
    c2 = sum(a.mag() for a in acts) / K
    eps_bound = K * (c1 * c3 + c2) * eps1
    return ConstantEstimates(c1, c2, c3, eps1 * N, eps1, eps_bound, (p_lo, p_hi))


@dataclass(frozen=True)
class ImplementationCheck:
    matches: bool
    gap: float
    welfare_gap: float


def check_implementation(types: BidProfile, config: MarketConfig, *, tol: float = 1e-6,
                         paper_theta1: bool = False) -> ImplementationCheck:
    """Compare the social-choice allocation with the truthful mechanism allocation."""
    planned = solve_social_choice(types, config)
    out = clear(types, config, paper_theta1=paper_theta1)
    gap = float(np.abs(planned.allocation.actions - out.allocation.actions).max())
    wgap = abs(planned.welfare - out.welfare_reported) / max(1.0, abs(planned.welfare))
    return ImplementationCheck(gap <= tol, gap, wgap)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonCell:
    population: int
    seed: int
    max_gain: float
    max_shift: float
    eps_bound: float
    kinks: int
    reports: tuple[DeviationReport, ...] = field(repr=False, default=())
    smooth_shift: float = 0.0


@dataclass(frozen=True)
class EpsilonTable:
    # (N, max gain, max shift, max kink-free shift, max eps bound, kinked samples)
    rows: list[tuple[int, float, float, float, float, int]]
    cells: list[EpsilonCell]
    gain_slope: float
    shift_slope: float


def loglog_slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def empirical_epsilon(config: MarketConfig, sizes: Sequence[int], seeds: Sequence[int],
                      search: SearchSpec, *, agents: int = 3) -> EpsilonTable:
    """Sweep population sizes; record the largest sampled gain and price shift.

    Samples that change the binding set are counted per cell and left out
    of the shift used for the slope fit; the incentive bound uses all of them.

    ``config`` fixes per-capita caps (rescaled to each size).  Agent ``i`` of
    seed ``s`` is the same type at every size, so the first ``agents``
    agents probed are identical across the sweep.
    """
    sizes = list(sizes)
    if len(sizes) < 2:
        raise InputError("need at least two population sizes")
    if not seeds:
        raise InputError("need at least one seed")
    cells = []
    for n in sizes:
        cfg = config.with_population(n)
        for s in seeds:
            pop = BidProfile.from_agents(
                draw_agent(s, i, cfg.type_bounds, cfg.horizon) for i in range(n))
            reports = tuple(best_deviation(pop[i], pop, cfg, search, i) for i in range(min(agents, n)))
            shift = max(r.price_shift for r in reports)
            consts = estimate_constants(cfg, pop, eps1=shift)
            cells.append(EpsilonCell(n, s, max(r.gain for r in reports), shift, consts.eps_bound,
                                     sum(r.kinks for r in reports), reports,
                                     max(r.smooth_price_shift for r in reports)))
    rows = []
    for n in sizes:
        mine = [c for c in cells if c.population == n]
        rows.append((n, max(c.max_gain for c in mine), max(c.max_shift for c in mine),
                     max(c.smooth_shift for c in mine), max(c.eps_bound for c in mine),
                     sum(c.kinks for c in mine)))
    return EpsilonTable(rows, cells, loglog_slope(sizes, [r[1] for r in rows]),
                        loglog_slope(sizes, [r[3] for r in rows]))
