"""Domain types and linear-quadratic agent dynamics.

Each agent ``i`` has a scalar state driven by

    x[k+1] = A * x[k] + B[k] * a[k],    k = 0 .. K-1

and a stage-additive valuation ``sum_k beta[k] * (x[k+1] - d[k])**2`` with
``beta < 0``.  Period ``k``'s valuation term penalises the post-action state
``x[k+1]``, so every action (including the last) is priced by some term.

Arrays are stored read-only so that every value type can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, InputError, MessageSpaceError

FloatArray = NDArray[np.float64]
# prices are plain float vectors of length K
PriceVector = FloatArray


def _frozen(x: ArrayLike, ndim: int, name: str) -> FloatArray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def as_vector(x: ArrayLike, length: int, name: str = "vector") -> FloatArray:
    """Coerce ``x`` to a float vector of the given length or raise InputError."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise InputError(f"{name} must have length {length}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class AgentType:
    """Private parameters of one agent (also the shape of a report)."""

    a_coef: float
    b_coefs: FloatArray
    betas: FloatArray
    targets: FloatArray
    x0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a_coef", float(self.a_coef))
        object.__setattr__(self, "x0", float(self.x0))
        for name in ("b_coefs", "betas", "targets"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1, name))
        K = self.b_coefs.shape[0]
        if K < 1:
            raise InputError("horizon must be at least 1")
        if self.betas.shape[0] != K or self.targets.shape[0] != K:
            raise InputError("b_coefs, betas and targets must share one length")
        if not self.a_coef > 0:
            raise InputError(f"a_coef must be positive, got {self.a_coef}")
        if not np.all(self.b_coefs < 0):
            raise InputError("b_coefs must be strictly negative")
        if not np.all(self.betas < 0):
            raise InputError("betas must be strictly negative")
        vals = np.concatenate([[self.a_coef, self.x0], self.b_coefs, self.betas, self.targets])
        if not np.all(np.isfinite(vals)):
            raise InputError("agent parameters must be finite")

    @property
    def horizon(self) -> int:
        return self.b_coefs.shape[0]

    def report_vector(self) -> FloatArray:
        """Flatten to ``(A, B_1..B_K, beta_1..beta_K, d_1..d_K)``, length 3K+1.

        The initial state is public and is not part of a report.
        """
        return np.concatenate([[self.a_coef], self.b_coefs, self.betas, self.targets])

    @classmethod
    def from_report_vector(cls, vec: ArrayLike, x0: float = 0.0) -> "AgentType":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or (vec.shape[0] - 1) % 3 != 0 or vec.shape[0] < 4:
            raise InputError(f"report vector must have length 3K+1, got {vec.shape}")
        K = (vec.shape[0] - 1) // 3
        return cls(vec[0], vec[1:1 + K], vec[1 + K:1 + 2 * K], vec[1 + 2 * K:], x0)


@dataclass(frozen=True)
class TypeBounds:
    """Box bounds on every AgentType field; also the per-agent message space.

    Each field is a ``(lower, upper)`` pair applied to every period.
    """

    a: tuple[float, float] = (0.5, 2.0)
    b: tuple[float, float] = (-2.0, -0.5)
    beta: tuple[float, float] = (-2.0, -0.1)
    d: tuple[float, float] = (-1.0, 1.0)
    x0: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        for name in ("a", "b", "beta", "d", "x0"):
            pair = getattr(self, name)
            try:
                lo, hi = (float(v) for v in pair)
            except (TypeError, ValueError):
                raise ConfigError("expected a [lower, upper] pair", field=f"type_bounds.{name}")
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ConfigError("bounds must be finite", field=f"type_bounds.{name}")
            if lo > hi:
                raise ConfigError(f"lower {lo} exceeds upper {hi}", field=f"type_bounds.{name}")
            object.__setattr__(self, name, (lo, hi))
        if not self.a[0] > 0:
            raise ConfigError("lower bound must be positive", field="type_bounds.a")
        if not self.b[1] < 0:
            raise ConfigError("upper bound must be negative", field="type_bounds.b")
        if not self.beta[1] < 0:
            raise ConfigError("upper bound must be negative", field="type_bounds.beta")

    def report_box(self, horizon: int) -> tuple[FloatArray, FloatArray]:
        """Lower and upper bounds of a flattened report of length 3K+1."""
        K = horizon
        lo = np.concatenate([[self.a[0]], np.full(K, self.b[0]), np.full(K, self.beta[0]),
                             np.full(K, self.d[0])])
        hi = np.concatenate([[self.a[1]], np.full(K, self.b[1]), np.full(K, self.beta[1]),
                             np.full(K, self.d[1])])
        return lo, hi

    def violations(self, agent: AgentType, tol: float = 0.0) -> list[str]:
        out = []
        checks = [("a_coef", np.atleast_1d(agent.a_coef), self.a),
                  ("b_coefs", agent.b_coefs, self.b),
                  ("betas", agent.betas, self.beta),
                  ("targets", agent.targets, self.d),
                  ("x0", np.atleast_1d(agent.x0), self.x0)]
        for name, vals, (lo, hi) in checks:
            if np.any(vals < lo - tol) or np.any(vals > hi + tol):
                out.append(f"{name} outside [{lo}, {hi}]")
        return out

    def contains(self, agent: AgentType, tol: float = 0.0) -> bool:
        return not self.violations(agent, tol)

    def extreme_agent(self, horizon: int, x0: float = 0.0) -> AgentType:
        """The corner type with the steepest price response.

        Large A, small |B| and small |beta| all enlarge every response
        coefficient in magnitude.
        """
        return AgentType(self.a[1], np.full(horizon, self.b[1]), np.full(horizon, self.beta[1]),
                         np.zeros(horizon), x0)


@dataclass(frozen=True)
class MarketConfig:
    """Horizon, population, per-period caps and linear procurement prices."""

    caps: FloatArray
    wholesale: FloatArray
    population: int
    type_bounds: TypeBounds = field(default_factory=TypeBounds)

    def __post_init__(self):
        caps = _frozen(self.caps, 1, "caps")
        wholesale = _frozen(self.wholesale, 1, "wholesale")
        if caps.shape[0] < 1:
            raise ConfigError("horizon must be at least 1", field="market.caps")
        if caps.shape != wholesale.shape:
            raise ConfigError("caps and wholesale must have the same length", field="market")
        if not (np.all(np.isfinite(caps)) and np.all(np.isfinite(wholesale))):
            raise ConfigError("caps and wholesale must be finite", field="market")
        if int(self.population) != self.population or self.population < 1:
            raise ConfigError("population must be a positive integer", field="market.population")
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "wholesale", wholesale)
        object.__setattr__(self, "population", int(self.population))

    @property
    def horizon(self) -> int:
        return self.caps.shape[0]

    @property
    def bid_dim(self) -> int:
        return 3 * self.horizon + 1

    def with_population(self, n: int) -> "MarketConfig":
        """Same market at population ``n``; caps scale to keep per-capita caps fixed."""
        return replace(self, caps=self.caps * (n / self.population), population=n)

    def with_caps(self, caps: ArrayLike) -> "MarketConfig":
        return replace(self, caps=np.asarray(caps, dtype=float))


@dataclass(frozen=True)
class Allocation:
    """Actions ``(N, K)`` and the induced states ``(N, K+1)``."""

    actions: FloatArray
    states: FloatArray

    def __post_init__(self):
        object.__setattr__(self, "actions", _frozen(self.actions, 2, "actions"))
        object.__setattr__(self, "states", _frozen(self.states, 2, "states"))
        N, K = self.actions.shape
        if self.states.shape != (N, K + 1):
            raise InputError(f"states must have shape {(N, K + 1)}, got {self.states.shape}")

    @property
    def aggregate(self) -> FloatArray:
        return self.actions.sum(axis=0)


@dataclass(frozen=True)
class BidProfile:
    """Reports of all N agents, stored column-wise for vectorised evaluation."""

    a_coef: FloatArray      # (N,)
    b_coefs: FloatArray     # (N, K)
    betas: FloatArray       # (N, K)
    targets: FloatArray     # (N, K)
    x0: FloatArray          # (N,)

    def __post_init__(self):
        for name, nd in (("a_coef", 1), ("b_coefs", 2), ("betas", 2), ("targets", 2), ("x0", 1)):
            object.__setattr__(self, name, _frozen(getattr(self, name), nd, name))
        N, K = self.b_coefs.shape
        if N < 1:
            raise InputError("population must be at least 1")
        if K < 1:
            raise InputError("horizon must be at least 1")
        if (self.a_coef.shape != (N,) or self.x0.shape != (N,)
                or self.betas.shape != (N, K) or self.targets.shape != (N, K)):
            raise InputError("inconsistent report array shapes")
        if not (np.all(self.a_coef > 0) and np.all(self.b_coefs < 0) and np.all(self.betas < 0)):
            raise InputError("reports violate sign constraints (A > 0, B < 0, beta < 0)")

    @classmethod
    def from_agents(cls, agents: Iterable[AgentType]) -> "BidProfile":
        agents = list(agents)
        if not agents:
            raise InputError("population must be at least 1")
        return cls(np.array([g.a_coef for g in agents]),
                   np.array([g.b_coefs for g in agents]),
                   np.array([g.betas for g in agents]),
                   np.array([g.targets for g in agents]),
                   np.array([g.x0 for g in agents]))

    def __len__(self) -> int:
        return self.a_coef.shape[0]

    @property
    def horizon(self) -> int:
        return self.b_coefs.shape[1]

    def __getitem__(self, i: int) -> AgentType:
        return AgentType(self.a_coef[i], self.b_coefs[i], self.betas[i], self.targets[i], self.x0[i])

    def agents(self) -> list[AgentType]:
        return [self[i] for i in range(len(self))]

    def replace(self, i: int, agent: AgentType) -> "BidProfile":
        """Profile with agent ``i``'s report swapped for ``agent``."""
        if agent.horizon != self.horizon:
            raise InputError("report horizon does not match the profile")
        cols = {}
        for name in ("a_coef", "b_coefs", "betas", "targets", "x0"):
            arr = np.array(getattr(self, name))
            arr[i] = getattr(agent, name)
            cols[name] = arr
        return BidProfile(**cols)

    def take(self, order: Sequence[int]) -> "BidProfile":
        idx = np.asarray(order, dtype=int)
        return BidProfile(self.a_coef[idx], self.b_coefs[idx], self.betas[idx],
                          self.targets[idx], self.x0[idx])

    def validate(self, bounds: TypeBounds, tol: float = 0.0) -> None:
        """Raise MessageSpaceError naming the first report outside ``bounds``."""
        checks = [("a_coef", self.a_coef[:, None], bounds.a),
                  ("b_coefs", self.b_coefs, bounds.b),
                  ("betas", self.betas, bounds.beta),
                  ("targets", self.targets, bounds.d),
                  ("x0", self.x0[:, None], bounds.x0)]
        for name, vals, (lo, hi) in checks:
            bad = np.any((vals < lo - tol) | (vals > hi + tol), axis=1)
            if bad.any():
                i = int(np.argmax(bad))
                raise MessageSpaceError(f"{name} outside [{lo}, {hi}]", agent_index=i)


@dataclass(frozen=True)
class ActionBox:
    """Optional per-period bounds on one agent's actions (default unbounded)."""

    lower: FloatArray
    upper: FloatArray

    def __post_init__(self):
        lo = _frozen(self.lower, 1, "lower")
        hi = _frozen(self.upper, 1, "upper")
        if lo.shape != hi.shape or np.any(lo > hi):
            raise InputError("action box needs equal-length lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, horizon: int) -> "ActionBox":
        return cls(np.full(horizon, -np.inf), np.full(horizon, np.inf))


def simulate_trajectory(agent: AgentType, actions: ArrayLike) -> FloatArray:
    """States ``(x_1, ..., x_{K+1})`` produced by ``actions`` from ``agent.x0``."""
    K = agent.horizon
    a = as_vector(actions, K, "actions")
    x = np.empty(K + 1)
    x[0] = agent.x0
    for k in range(K):
        x[k + 1] = agent.a_coef * x[k] + agent.b_coefs[k] * a[k]
    return x


def simulate_population(bids: BidProfile, actions: ArrayLike) -> FloatArray:
    """Vectorised :func:`simulate_trajectory` over a profile; returns ``(N, K+1)``."""
    a = np.asarray(actions, dtype=float)
    N, K = len(bids), bids.horizon
    if a.shape != (N, K):
        raise InputError(f"actions must have shape {(N, K)}, got {a.shape}")
    x = np.empty((N, K + 1))
    x[:, 0] = bids.x0
    for k in range(K):
        x[:, k + 1] = bids.a_coef * x[:, k] + bids.b_coefs[:, k] * a[:, k]
    return x


def make_allocation(bids: BidProfile, actions: ArrayLike) -> Allocation:
    return Allocation(np.asarray(actions, dtype=float), simulate_population(bids, actions))


def valuation(agent: AgentType, actions: ArrayLike) -> float:
    """``sum_k beta[k] * (x[k+1] - d[k])**2`` along the simulated trajectory."""
    x = simulate_trajectory(agent, actions)
    return float(np.sum(agent.betas * (x[1:] - agent.targets) ** 2))


def population_valuation(bids: BidProfile, actions: ArrayLike) -> FloatArray:
    """Per-agent valuations ``(N,)`` for an ``(N, K)`` action matrix."""
    x = simulate_population(bids, actions)
    return np.sum(bids.betas * (x[:, 1:] - bids.targets) ** 2, axis=1)


def valuation_gradient(agent: AgentType, actions: ArrayLike) -> FloatArray:
    """Gradient of :func:`valuation` in the actions, by a backward (adjoint) sweep."""
    x = simulate_trajectory(agent, actions)
    K = agent.horizon
    lam = np.empty(K)
    carry = 0.0
    for k in range(K - 1, -1, -1):
        carry = 2.0 * agent.betas[k] * (x[k + 1] - agent.targets[k]) + agent.a_coef * carry
        lam[k] = carry
    return agent.b_coefs * lam


def population_valuation_gradient(bids: BidProfile, actions: ArrayLike) -> FloatArray:
    """Row-wise :func:`valuation_gradient`; returns ``(N, K)``."""
    x = simulate_population(bids, actions)
    N, K = len(bids), bids.horizon
    lam = np.empty((N, K))
    carry = np.zeros(N)
    for k in range(K - 1, -1, -1):
        carry = 2.0 * bids.betas[:, k] * (x[:, k + 1] - bids.targets[:, k]) + bids.a_coef * carry
        lam[:, k] = carry
    return bids.b_coefs * lam


def impulse_response(agent: AgentType) -> tuple[FloatArray, FloatArray]:
    """Post-action states as ``G @ a + h``; columns of ``G`` are unit-impulse runs."""
    K = agent.horizon
    zero = replace(agent, x0=0.0)
    G = np.column_stack([simulate_trajectory(zero, np.eye(K)[j])[1:] for j in range(K)])
    h = simulate_trajectory(agent, np.zeros(K))[1:]
    return G, h


def valuation_hessian(agent: AgentType) -> FloatArray:
    """``2 G^T diag(beta) G``; negative definite because ``beta < 0``."""
    G, _ = impulse_response(agent)
    return 2.0 * G.T @ (agent.betas[:, None] * G)


def utility(agent: AgentType, actions: ArrayLike, prices: ArrayLike) -> float:
    """Valuation minus payment ``sum_k p[k] * a[k]``."""
    K = agent.horizon
    a = as_vector(actions, K, "actions")
    p = as_vector(prices, K, "prices")
    return valuation(agent, a) - float(p @ a)


def aggregate_demand(bids: BidProfile, prices: ArrayLike, *, paper_theta1: bool = False) -> FloatArray:
    """Per-period sum of every agent's price response."""
    from .price_response import population_respond

    p = as_vector(prices, bids.horizon, "prices")
    return population_respond(bids, p, paper_theta1=paper_theta1).sum(axis=0)
