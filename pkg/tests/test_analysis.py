import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniprice.analysis import (Interval, SearchSpec, best_deviation, check_implementation,
                               empirical_epsilon, estimate_constants, induced_utility, loglog_slope,
                               misreport_samples, response_box, utility_gradient_box)
from uniprice.errors import InputError
from uniprice.model import AgentType, BidProfile, MarketConfig, TypeBounds, utility, valuation_gradient
from uniprice.price_response import respond

from conftest import random_agent, random_scenario

BOUNDS = TypeBounds(a=(0.8, 1.2), b=(-1.5, -0.75), beta=(-2.0, -0.5), d=(-1.0, 1.0), x0=(-1.0, 1.0))

finite = st.floats(-10, 10)


@given(finite, finite, finite, finite, st.sampled_from(["+", "-", "*"]))
def test_interval_encloses_pointwise(a, b, c, d, op):
    x, y = Interval(min(a, b), max(a, b)), Interval(min(c, d), max(c, d))
    f = {"+": lambda u, v: u + v, "-": lambda u, v: u - v, "*": lambda u, v: u * v}[op]
    z = f(x, y)
    for u in (x.lo, x.hi, (x.lo + x.hi) / 2):
        for v in (y.lo, y.hi, (y.lo + y.hi) / 2):
            assert z.lo - 1e-9 <= f(u, v) <= z.hi + 1e-9


def test_interval_edge_cases():
    assert Interval(-2.0, 1.0).sq() == Interval(0.0, 4.0)
    assert Interval(-3.0, -1.0).sq() == Interval(1.0, 9.0)
    assert (1.0 / Interval(2.0, 4.0)) == Interval(0.25, 0.5)
    with pytest.raises(ZeroDivisionError):
        Interval(1.0, 2.0) / Interval(-1.0, 1.0)


def test_boxes_enclose_sampled_types(rng):
    K = 3
    lo, hi = np.array([0.2, 0.5, 0.1]), np.array([1.0, 1.5, 0.9])
    acts = response_box(BOUNDS, lo, hi)
    grads = utility_gradient_box(BOUNDS, acts, lo, hi)
    for _ in range(500):
        agent = random_agent(rng, K, BOUNDS)
        p = rng.uniform(lo, hi)
        a = respond(agent, p)
        for k in range(K):
            assert acts[k].lo - 1e-12 <= a[k] <= acts[k].hi + 1e-12
        # any action in the box, any price in the box
        b = np.array([rng.uniform(x.lo, x.hi) for x in acts])
        q = rng.uniform(lo, hi)
        g = valuation_gradient(agent, b) - q
        for k in range(K):
            assert grads[k].lo - 1e-9 <= g[k] <= grads[k].hi + 1e-9


def test_misreport_samples_prefix_and_layout(rng):
    truth = random_agent(rng, 2, BOUNDS)
    long = misreport_samples(truth, BOUNDS, SearchSpec(40, 1))
    short = misreport_samples(truth, BOUNDS, SearchSpec(25, 1))
    assert len(long) == 40
    for a, b in zip(short, long):
        np.testing.assert_array_equal(a.report_vector(), b.report_vector())
    np.testing.assert_array_equal(long[0].report_vector(), truth.report_vector())
    lo, hi = BOUNDS.report_box(2)
    for m in long:
        r = m.report_vector()
        assert np.all(r >= lo - 1e-12) and np.all(r <= hi + 1e-12)
        assert m.x0 == truth.x0
    with pytest.raises(InputError):
        misreport_samples(truth, BOUNDS, SearchSpec(0))


def binding_population(rng, N, K=3):
    bids = BidProfile.from_agents(random_agent(rng, K, BOUNDS) for _ in range(N))
    pw = np.array([0.5, 1.0, 0.8])[:K]
    from uniprice.price_response import population_respond
    caps = population_respond(bids, pw).sum(axis=0) - 0.3 * N
    return bids, MarketConfig(caps, pw, N, BOUNDS)


def test_best_deviation_properties(rng):
    bids, cfg = binding_population(rng, 8)
    small = best_deviation(bids[0], bids, cfg, SearchSpec(20, 0), 0)
    large = best_deviation(bids[0], bids, cfg, SearchSpec(60, 0), 0)
    assert small.gain >= 0.0
    assert large.gain >= small.gain
    assert large.samples == 60
    assert small.truthful_utility == pytest.approx(induced_utility(bids[0], bids, cfg, 0))
    consts = estimate_constants(cfg, bids, eps1=large.price_shift)
    assert large.gain <= consts.eps_bound + 1e-6


def test_nonbinding_gain_is_zero(rng):
    bids = BidProfile.from_agents(random_agent(rng, 2, BOUNDS) for _ in range(4))
    cfg = MarketConfig([1e3, 1e3], [0.3, 0.6], 4, BOUNDS)
    dev = best_deviation(bids[2], bids, cfg, SearchSpec(50, 0), 2)
    assert dev.gain <= 1e-7
    assert dev.price_shift == 0.0


def test_constants_example_agent():
    bounds = TypeBounds(a=(1.0, 1.0), b=(-1.0, -1.0), beta=(-0.5, -0.5), d=(0.0, 0.0), x0=(0.0, 0.0))
    agent = AgentType(1.0, [-1.0, -1.0], [-0.5, -0.5], [0.0, 0.0], 0.0)
    bids = BidProfile.from_agents([agent] * 2)
    cfg = MarketConfig([-1.0, -3.0], [1.0, 1.0], 2, bounds)
    c = estimate_constants(cfg, bids, eps1=0.1)
    assert c.c3 == pytest.approx(3.0)
    assert c.eps_bound == pytest.approx(2 * (c.c1 * c.c3 + c.c2) * 0.1)
    assert c.c4 == pytest.approx(0.2)
    # the price box hugs the cleared prices
    np.testing.assert_allclose(c.price_box[1], [2.6, 2.1])


def test_estimated_eps1_covers_sampled_shift(rng):
    bids, cfg = binding_population(rng, 20)
    est = estimate_constants(cfg, bids, probe_agents=[0])
    dev = best_deviation(bids[0], bids, cfg, SearchSpec(40, 0), 0)
    # linearised reach over the whole message box vs sampled shift
    assert dev.price_shift <= 1.5 * est.eps1


def test_check_implementation(rng):
    bids, cfg = random_scenario(rng, 10, 4)
    res = check_implementation(bids, cfg)
    assert res.matches and res.gap <= 1e-9 and res.welfare_gap <= 1e-9


def test_loglog_slope():
    xs = np.array([10, 100, 1000])
    assert loglog_slope(xs, 3.0 / xs) == pytest.approx(-1.0)
    assert np.isnan(loglog_slope(xs, [1.0, 0.0, 1.0]))
    assert np.isnan(loglog_slope([10], [1.0]))


def test_empirical_epsilon_table():
    cfg = MarketConfig([-0.3, -0.7], [0.5, 1.0], 1, BOUNDS)
    table = empirical_epsilon(cfg, [10, 40], [0], SearchSpec(15, 0), agents=2)
    assert [r[0] for r in table.rows] == [10, 40]
    assert len(table.cells) == 2
    for cell in table.cells:
        assert cell.max_gain <= cell.eps_bound + 1e-6
        assert cell.smooth_shift <= cell.max_shift
    assert all(len(r) == 6 for r in table.rows)
    with pytest.raises(InputError):
        empirical_epsilon(cfg, [10], [0], SearchSpec(5))


def test_kinked_samples_counted_separately():
    agent = AgentType(1.0, [-1.0], [-0.5], [0.0], 0.0)
    other = AgentType(1.1, [-0.9], [-0.7], [0.1], 0.2)
    bids = BidProfile.from_agents([agent, other])
    cfg = MarketConfig(clear_demand(bids, [1.0]), [1.0], 2, BOUNDS.__class__())
    dev = best_deviation(agent, bids, cfg, SearchSpec(30, 0), 0)
    assert dev.kinks > 0
    assert dev.smooth_price_shift <= dev.price_shift


def clear_demand(bids, prices):
    from uniprice.price_response import population_respond
    return population_respond(bids, np.asarray(prices, dtype=float)).sum(axis=0)
