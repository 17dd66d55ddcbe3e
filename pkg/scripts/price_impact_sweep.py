"""Misreport-induced price shift and sampled gain against population size.

    python3 scripts/price_impact_sweep.py --config configs/binding.json --budget 200
"""

from __future__ import annotations

import argparse
from pathlib import Path

from uniprice.analysis import SearchSpec, empirical_epsilon
from uniprice.scenario import load_spec


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=Path("configs/binding.json"))
    parser.add_argument("--sizes", default="10,50,100,500,1000")
    parser.add_argument("--budget", type=int, default=200)
    parser.add_argument("--agents", type=int, default=3)
    parser.add_argument("--seeds", default=None, help="comma list; defaults to the config seed")
    args = parser.parse_args()

    spec = load_spec(args.config)
    sizes = [int(s) for s in args.sizes.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [spec.seed]
    table = empirical_epsilon(spec.config, sizes, seeds, SearchSpec(args.budget, 0), agents=args.agents)
    print(f"{'N':>6} {'max gain':>12} {'max shift':>12} {'kink-free':>12} {'shift*N':>10} "
          f"{'bound':>12} {'kinks':>6}")
    for n, gain, shift, smooth, bound, kinks in table.rows:
        print(f"{n:>6} {gain:>12.3e} {shift:>12.3e} {smooth:>12.3e} {smooth * n:>10.3f} "
              f"{bound:>12.3e} {kinks:>6}")
    print(f"log-log slope: kink-free shift {table.shift_slope:.3f}, gain {table.gain_slope:.3f}")


if __name__ == "__main__":
    main()
