"""How far the best point of a brute-force grid sits from the planner optimum.

Prints, per random small scenario, the distance in grid cells, the welfare
gap, the a-priori grid error bound and the Hessian condition number.  Large
cell distances track ill-conditioning, not grid resolution.

    python3 scripts/grid_cell_distance.py --scenarios 40 --points 21
"""

from __future__ import annotations

import argparse

import numpy as np

from uniprice.model import AgentType, BidProfile, MarketConfig, valuation_hessian
from uniprice.planner import GridSpec, brute_force_welfare, grid_error_bound, solve_social_choice
from uniprice.price_response import population_respond


def scenario(rng):
    N, K = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    bids = BidProfile.from_agents(
        AgentType(rng.uniform(0.5, 2.0), rng.uniform(-2, -0.5, K), rng.uniform(-2, -0.1, K),
                  rng.uniform(-1, 1, K), rng.uniform(-1, 1)) for _ in range(N))
    pw = rng.uniform(0, 1, K)
    caps = population_respond(bids, pw).sum(axis=0) + N * rng.uniform(-1, 1, K)
    return bids, MarketConfig(caps, pw, N)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenarios", type=int, default=40)
    parser.add_argument("--points", type=int, default=21)
    parser.add_argument("--width", type=float, default=1.0, help="grid half-width around the optimum")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'N':>2} {'K':>2} {'cells':>7} {'gap':>10} {'bound':>10} {'cond':>9}")
    worst = 0.0
    for _ in range(args.scenarios):
        bids, cfg = scenario(rng)
        sol = solve_social_choice(bids, cfg)
        a = sol.allocation.actions
        shift = 0.1 * args.width * rng.uniform(0, 1, a.shape)
        bf = brute_force_welfare(bids, cfg, GridSpec(a - args.width + shift, a + args.width + shift,
                                                    args.points))
        cells = float((np.abs(bf.actions - a) / bf.spacing).max())
        cond = max(np.linalg.cond(valuation_hessian(bids[i])) for i in range(len(bids)))
        worst = max(worst, cells)
        print(f"{len(bids):>2} {bids.horizon:>2} {cells:>7.3f} {sol.welfare - bf.welfare:>10.3e} "
              f"{grid_error_bound(bids, sol, bf.spacing):>10.3e} {cond:>9.1f}")
    print(f"worst distance: {worst:.3f} cells")


if __name__ == "__main__":
    main()
