import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniprice.errors import InputError, MessageSpaceError
from uniprice.mechanism import clear, nu_residual, price_jacobian_wrt_report
from uniprice.model import AgentType, BidProfile, MarketConfig, TypeBounds
from uniprice.planner import solve_social_choice

from conftest import WIDE, random_agent, random_scenario


def test_clear_hand_example():
    agent = AgentType(1.0, [-1.0, -1.0], [-0.5, -0.5], [0.0, 0.0], 0.0)
    bids = BidProfile.from_agents([agent, agent])
    out = clear(bids, MarketConfig([-1.0, -3.0], [1.0, 1.0], 2))
    np.testing.assert_allclose(out.prices, [2.5, 2.0], atol=1e-12)
    assert out.binding.tolist() == [True, True]
    assert out.welfare_reported == pytest.approx(-0.25)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_clear_matches_planner_and_zeroes_nu(seed):
    rng = np.random.default_rng(seed)
    bids, cfg = random_scenario(rng, int(rng.integers(1, 15)), int(rng.integers(1, 8)))
    out = clear(bids, cfg)
    sol = solve_social_choice(bids, cfg)
    np.testing.assert_allclose(out.prices, sol.prices, atol=1e-9)
    assert np.abs(nu_residual(out.prices, bids, cfg)).max() <= 1e-7 * (1 + np.abs(cfg.caps).max())
    assert np.all(out.prices >= cfg.wholesale)
    assert np.all(out.aggregate <= cfg.caps + 1e-7)


def test_nu_zero_set_independent_of_alphas(rng):
    bids, cfg = random_scenario(rng, 5, 4)
    out = clear(bids, cfg)
    scale = 1 + np.abs(cfg.caps).max()
    for alphas in ([0.1, 10.0], np.array([[2.0, 0.5]] * 4), [1.0, 1.0]):
        assert np.abs(nu_residual(out.prices, bids, cfg, alphas)).max() <= 1e-6 * scale
    off = out.prices + 0.1
    assert np.abs(nu_residual(off, bids, cfg)).max() > 1e-3


def test_nu_rejects_nonpositive_alphas(rng):
    bids, cfg = random_scenario(rng, 2, 2)
    with pytest.raises(InputError):
        nu_residual(cfg.wholesale, bids, cfg, [0.0, 1.0])


def test_nu_tie_at_wholesale_uses_demand():
    agent = AgentType(1.0, [-1.0], [-0.5], [0.0], 0.0)
    bids = BidProfile.from_agents([agent])
    # demand at p = 1 is -1
    slack = MarketConfig([0.0], [1.0], 1)
    assert nu_residual([1.0], bids, slack)[0] == 0.0
    tight = MarketConfig([-2.0], [1.0], 1)
    assert nu_residual([1.0], bids, tight)[0] == pytest.approx(1.0)


def test_permutation_invariance(rng):
    bids, cfg = random_scenario(rng, 6, 3)
    out = clear(bids, cfg)
    perm = rng.permutation(6)
    again = clear(bids.take(perm), cfg)
    np.testing.assert_allclose(again.prices, out.prices, atol=1e-12)
    np.testing.assert_allclose(again.allocation.actions, out.allocation.actions[perm], atol=1e-12)


def test_prices_nonincreasing_in_caps(rng):
    for _ in range(20):
        bids, cfg = random_scenario(rng, 4, 4)
        looser = cfg.with_caps(cfg.caps + rng.uniform(0, 2, 4))
        assert np.all(clear(bids, looser).prices <= clear(bids, cfg).prices + 1e-10)


def test_message_space_enforced(rng):
    bounds = TypeBounds()
    bids = BidProfile.from_agents([random_agent(rng, 2, bounds), AgentType(9.0, [-1, -1], [-1, -1], [0, 0])])
    cfg = MarketConfig([0.0, 0.0], [0.0, 0.0], 2, bounds)
    with pytest.raises(MessageSpaceError) as info:
        clear(bids, cfg)
    assert info.value.agent_index == 1


def test_price_jacobian_matches_implicit_function(rng):
    checked = 0
    for _ in range(30):
        bids, cfg = random_scenario(rng, 5, 3)
        jac = price_jacobian_wrt_report(bids, cfg, 0)
        assert jac.matrix.shape == (3, 10)
        if jac.differentiable:
            np.testing.assert_allclose(jac.finite_difference, jac.analytic, atol=1e-6)
            checked += 1
        # slack periods never move
        assert np.all(jac.finite_difference[~jac.binding] == 0.0)
    assert checked >= 20


def test_price_jacobian_flags_kink():
    agent = AgentType(1.0, [-1.0], [-0.5], [0.0], 0.0)
    bids = BidProfile.from_agents([agent])
    # demand at wholesale equals the cap exactly
    cfg = MarketConfig([-1.0], [1.0], 1, WIDE)
    out = clear(bids, cfg)
    assert out.binding.tolist() == [False]
    assert not price_jacobian_wrt_report(bids, cfg, 0).differentiable
