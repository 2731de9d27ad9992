#!/usr/bin/env python3
"""False-positive / false-negative temper comparison: AEB vs APB.

Ghost detections (false positives) make a hard-braking baseline slam the
brakes at full strength in a single step, while the jerk-bounded
intervention responds mildly; missed detections (false negatives) blind
either system for the affected steps. This script measures both.

Usage: python scripts/ghost_fp_comparison.py [--n 50] [--seed 77]
"""

import argparse
import sys

from apbsim import KinematicState, RssParams, SceneState
from apbsim.controllers import ConstantSpeed
from apbsim.sim import Scenario, SensorModel, sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=77)
    ap.add_argument("--ghost-rates", type=float, nargs="*",
                    default=[0.002, 0.01, 0.05])
    args = ap.parse_args()

    p = RssParams()
    base = Scenario(
        params=p,
        initial=SceneState(KinematicState(0.0, 20.0, 0.0),
                           KinematicState(150.0, 20.0, 0.0), 150.0),
        driver=ConstantSpeed(),
        sensor=SensorModel(ghost_rate=0.01, ghost_gap=12.0),
        dt=0.01,
        horizon=8.0,
    )

    print("ghost (false-positive) sweeps: phantom obstacle 12 m ahead")
    print(f"{'ghost_rate':>11} {'arm':>5} {'interventions':>14} "
          f"{'max_decel':>10} {'max_jerk':>10}")
    for rate in args.ghost_rates:
        res = sweep(base, n=args.n, seed=args.seed,
                    paired_controllers=("aeb", "apb"),
                    axes={"sensor.ghost_rate": [rate]})
        for arm, r in res.items():
            print(f"{rate:11.3f} {arm:>5} {r.n_interventions:14d} "
                  f"{r.max_commanded_decel:10.2f} {r.max_commanded_jerk:10.1f}")

    print()
    print("miss (false-negative) sweep: tailgating scenarios with a blind sensor")
    blind = load_tailgaters(miss_rate=1.0)
    sighted = load_tailgaters(miss_rate=0.0)
    for label, sc in (("blind", blind), ("sighted", sighted)):
        res = sweep(sc, n=args.n, seed=args.seed, paired_controllers=("apb",))
        r = res["apb"]
        print(f"  {label:8} collisions {r.n_collisions:4d} / {r.n_scenarios}"
              f"  interventions {r.n_interventions}")
    return 0


def load_tailgaters(miss_rate: float) -> Scenario:
    from dataclasses import replace

    from apbsim.scenario_io import load_scenario

    sc = load_scenario("tailgater_population")
    return replace(sc, sensor=SensorModel(miss_rate=miss_rate))


if __name__ == "__main__":
    sys.exit(main())
