import numpy as np
import pytest
from hypothesis import strategies as st

from uniprice.model import AgentType, BidProfile, MarketConfig, TypeBounds
from uniprice.price_response import population_respond

# parameter box used throughout the acceptance criteria
WIDE = TypeBounds(a=(0.5, 2.0), b=(-2.0, -0.5), beta=(-2.0, -0.1), d=(-1.0, 1.0), x0=(-1.0, 1.0))


def random_agent(rng, K, bounds=WIDE):
    return AgentType(rng.uniform(*bounds.a), rng.uniform(*bounds.b, K), rng.uniform(*bounds.beta, K),
                     rng.uniform(*bounds.d, K), rng.uniform(*bounds.x0))


def random_scenario(rng, N, K, bounds=WIDE, slack_scale=1.0):
    """Random population with caps placed around the unconstrained demand.

    Each period's cap is demand at wholesale prices plus ``N * u`` with
    ``u ~ U(-slack_scale, slack_scale)``, so binding and slack periods mix.
    """
    bids = BidProfile.from_agents(random_agent(rng, K, bounds) for _ in range(N))
    pw = rng.uniform(0.0, 1.0, K)
    demand = population_respond(bids, pw).sum(axis=0)
    caps = demand + N * rng.uniform(-slack_scale, slack_scale, K)
    return bids, MarketConfig(caps, pw, N, bounds)


@st.composite
def agents(draw, max_horizon=8, bounds=WIDE):
    K = draw(st.integers(1, max_horizon))

    def vec(lo, hi):
        return np.array(draw(st.lists(st.floats(lo, hi), min_size=K, max_size=K)))

    return AgentType(draw(st.floats(*bounds.a)), vec(*bounds.b), vec(*bounds.beta),
                     vec(*bounds.d), draw(st.floats(*bounds.x0)))


@pytest.fixture
def example_agent():
    return AgentType(1.0, [-1.0, -1.0], [-0.5, -0.5], [0.0, 0.0], 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Print one PASS/FAIL line per acceptance criterion, inline and in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(criterion, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
        lines.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
