#!/usr/bin/env python3
"""Empirical no-collision verification at scale.

Runs randomized compliant adversarial scenarios (tailgating driver,
preventive braking active, fronts free to brake at their worst-case
level at any time) and reports the minimum-gap distribution. A single
collision fails the run.

Usage: python scripts/run_verification.py [--n 100000] [--seed 2718]
"""

import argparse
import sys
import time

from apbsim import RssParams, verify_no_collision


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2718)
    ap.add_argument("--horizon", type=float, default=12.0)
    args = ap.parse_args()

    p = RssParams()
    t0 = time.time()
    report = verify_no_collision(args.n, args.seed, p, horizon=args.horizon)
    elapsed = time.time() - t0

    print(f"scenarios: {report.n}  ({elapsed:.1f} s)")
    print(f"collisions: {report.n_collisions}")
    print(f"minimum gap overall: {report.min_gap_overall:.9f} m")
    counts, edges = report.histogram(bins=25)
    print("min-gap distribution (m):")
    for c, lo, hi in zip(counts, edges, edges[1:]):
        bar = "#" * int(60 * c / max(1, counts.max()))
        print(f"  [{lo:9.3f}, {hi:9.3f})  {c:7d} {bar}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
