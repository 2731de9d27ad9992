#!/usr/bin/env python3
"""Accident-elimination experiment on a tailgater population.

Paired sweep: every scenario runs once without any controller and once
with preventive braking whose interventions fail (per dangerous
situation) at a configurable rate. The elimination rate is
1 - collisions_with / collisions_without on identical scenario draws.

Usage: python scripts/elimination_experiment.py [--n 10000] [--seed 424242]
"""

import argparse
import sys

from apbsim.scenario_io import load_scenario
from apbsim.sim import sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=424242)
    ap.add_argument("--p-fail", type=float, nargs="*", default=[0.0, 0.01, 0.05, 0.1])
    args = ap.parse_args()

    base = load_scenario("tailgater_population")
    print(f"{'p_fail':>8} {'baseline':>9} {'apb':>7} {'suppressed':>11} "
          f"{'interventions':>14} {'elimination':>12}")
    for p_fail in args.p_fail:
        res = sweep(base, n=args.n, seed=args.seed,
                    paired_controllers=("none", "apb"), p_fail=p_fail)
        b, a = res["none"], res["apb"]
        elim = f"{a.elimination_rate:.4f}" if a.elimination_rate is not None else "n/a"
        print(f"{p_fail:8.3f} {b.n_collisions:9d} {a.n_collisions:7d} "
              f"{a.n_suppressed:11d} {a.n_interventions:14d} {elim:>12}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
