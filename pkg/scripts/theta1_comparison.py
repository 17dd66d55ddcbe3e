"""Cleared prices under the default and the alternative first-period slope.

    python3 scripts/theta1_comparison.py --config configs/binding.json
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from uniprice.mechanism import clear
from uniprice.model import valuation_gradient
from uniprice.scenario import generate_population, load_spec


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=Path("configs/binding.json"))
    args = parser.parse_args()

    spec = load_spec(args.config)
    bids = generate_population(spec)
    for label, flag in (("default", False), ("alternative", True)):
        out = clear(bids, spec.config, paper_theta1=flag)
        foc = max(float(np.abs(valuation_gradient(bids[i], out.allocation.actions[i]) - out.prices).max())
                  for i in range(len(bids)))
        print(f"{label:>12}: prices {np.array2string(out.prices, precision=4)}  "
              f"welfare {out.welfare_reported:.4f}  max FOC residual {foc:.2e}")


if __name__ == "__main__":
    main()
