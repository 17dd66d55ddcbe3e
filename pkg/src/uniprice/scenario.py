"""Scenario specs, JSON config ingestion and seeded population draws."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError
from .model import AgentType, BidProfile, MarketConfig, TypeBounds

SAMPLERS = ("uniform",)


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    config: MarketConfig
    sampling: Mapping[str, Any] = field(default_factory=lambda: {"distribution": "uniform"})
    scenario_name: str = "scenario"
    prices: np.ndarray | None = None

    def __post_init__(self):
        dist = self.sampling.get("distribution", "uniform")
        if dist not in SAMPLERS:
            raise ConfigError(f"unknown distribution {dist!r}", field="sampling.distribution")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", field="seed")

    def with_population(self, n: int) -> "ScenarioSpec":
        return ScenarioSpec(self.seed, self.config.with_population(n), self.sampling,
                            self.scenario_name, self.prices)

    def digest(self) -> str:
        """Stable hash of the config and seed."""
        payload = json.dumps(spec_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def draw_agent(seed: int, index: int, bounds: TypeBounds, horizon: int) -> AgentType:
    """Agent ``index`` of the population seeded by ``seed``.

    Each agent has its own seed stream, so a population of size N is a
    prefix of every larger population with the same seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    K = horizon
    return AgentType(rng.uniform(*bounds.a), rng.uniform(*bounds.b, size=K),
                     rng.uniform(*bounds.beta, size=K), rng.uniform(*bounds.d, size=K),
                     rng.uniform(*bounds.x0))


def generate_population(spec: ScenarioSpec) -> BidProfile:
    """Truthful types for ``spec.config.population`` agents drawn within the bounds."""
    cfg = spec.config
    return BidProfile.from_agents(
        draw_agent(spec.seed, i, cfg.type_bounds, cfg.horizon) for i in range(cfg.population))


def _pair(obj, name):
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise ConfigError("expected [lower, upper]", field=f"type_bounds.{name}")
    return tuple(obj)


def _floats(obj, name):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a list of numbers", field=name)
    if arr.ndim != 1:
        raise ConfigError("expected a flat list of numbers", field=name)
    return arr


def spec_from_dict(data: Mapping[str, Any]) -> ScenarioSpec:
    if not isinstance(data, Mapping):
        raise ConfigError("top level must be an object")
    for key in ("market", "seed"):
        if key not in data:
            raise ConfigError("missing required key", field=key)
    market = data["market"]
    if not isinstance(market, Mapping):
        raise ConfigError("must be an object", field="market")
    if "population" not in market:
        raise ConfigError("missing required key", field="market.population")
    pop = market["population"]
    if not isinstance(pop, int) or isinstance(pop, bool):
        raise ConfigError("must be an integer", field="market.population")
    if "wholesale" not in market:
        raise ConfigError("missing required key", field="market.wholesale")
    wholesale = _floats(market["wholesale"], "market.wholesale")
    if "caps" in market:
        caps = _floats(market["caps"], "market.caps")
    elif "caps_per_agent" in market:
        caps = _floats(market["caps_per_agent"], "market.caps_per_agent") * pop
    else:
        raise ConfigError("need caps or caps_per_agent", field="market.caps")
    if "horizon" in market and market["horizon"] != len(wholesale):
        raise ConfigError(f"horizon {market['horizon']} != len(wholesale) {len(wholesale)}",
                          field="market.horizon")
    tb = data.get("type_bounds", {})
    if not isinstance(tb, Mapping):
        raise ConfigError("must be an object", field="type_bounds")
    unknown = set(tb) - {"a", "b", "beta", "d", "x0"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="type_bounds")
    bounds = TypeBounds(**{k: _pair(v, k) for k, v in tb.items()})
    config = MarketConfig(caps, wholesale, pop, bounds)
    seed = data["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("must be an integer", field="seed")
    prices = data.get("prices")
    if prices is not None:
        prices = _floats(prices, "prices")
        if prices.shape[0] != config.horizon:
            raise ConfigError(f"expected {config.horizon} entries", field="prices")
    return ScenarioSpec(seed, config, dict(data.get("sampling", {"distribution": "uniform"})),
                        str(data.get("name", "scenario")), prices)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    cfg, tb = spec.config, spec.config.type_bounds
    out = {
        "name": spec.scenario_name,
        "seed": int(spec.seed),
        "market": {"population": cfg.population, "caps": cfg.caps.tolist(),
                   "wholesale": cfg.wholesale.tolist()},
        "type_bounds": {k: list(getattr(tb, k)) for k in ("a", "b", "beta", "d", "x0")},
        "sampling": dict(spec.sampling),
    }
    if spec.prices is not None:
        out["prices"] = np.asarray(spec.prices).tolist()
    return out


def load_spec(path: str | Path) -> ScenarioSpec:
    """Read a JSON scenario; malformed JSON reports its line and column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return spec_from_dict(data)
