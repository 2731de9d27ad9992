"""Command-line surface.

Commands: safe-distance, simulate, verify, sweep, compare (alias for a
paired sweep). Exit codes: 0 success, 2 invalid parameters or scenario
schema, 3 a simulation ended in a collision, 4 verification failed.
The APBSIM_PARAMS environment variable names the default parameter file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .params import KinematicState, RssParams
from .safety import safe_distance_apb, safe_distance_rss
from .scenario_io import (
    ScenarioError,
    list_presets,
    load_params,
    load_scenario,
    write_trace_csv,
)
from .sim import run, sweep, verify_no_collision

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_COLLISION = 3
EXIT_VERIFY_FAIL = 4


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_SCHEMA


def _resolve_params(arg: str | None) -> tuple[RssParams, float]:
    source = arg or os.environ.get("APBSIM_PARAMS") or "defaults"
    return load_params(source)


def _parse_grid(spec: str) -> tuple[str, np.ndarray]:
    # axis=lo:hi:step, endpoints inclusive
    try:
        axis, rng = spec.split("=", 1)
        lo, hi, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise ValueError(f"bad grid spec {spec!r}, expected axis=lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise ValueError(f"bad grid range in {spec!r}")
    n = int(round((hi - lo) / step)) + 1
    return axis, lo + step * np.arange(n)


def cmd_safe_distance(args) -> int:
    try:
        p, _latency = _resolve_params(args.params)
    except ScenarioError as e:
        return _fail(str(e))
    axes: dict[str, np.ndarray] = {}
    for spec in args.grid or []:
        try:
            axis, values = _parse_grid(spec)
        except ValueError as e:
            return _fail(str(e))
        if axis not in ("v_rear", "v_front", "a_rear"):
            return _fail(f"grid axis must be one of v_rear, v_front, a_rear, got {axis!r}")
        axes[axis] = values
    base = {"v_rear": np.array([args.v_rear]), "v_front": np.array([args.v_front]),
            "a_rear": np.array([args.a_rear])}
    base.update(axes)

    cols = ["v_rear", "v_front", "a_rear", "d_safe"]
    if args.classic:
        cols.append("d_safe_classic")
    rows = []
    try:
        for vr in base["v_rear"]:
            for vf in base["v_front"]:
                for ar in base["a_rear"]:
                    rear = KinematicState(0.0, float(vr), float(ar))
                    row = [vr, vf, ar, safe_distance_apb(rear, float(vf), p)]
                    if args.classic:
                        row.append(safe_distance_rss(float(vr), float(vf), p))
                    rows.append(row)
    except ValueError as e:
        return _fail(str(e))

    if args.format == "csv":
        print(",".join(cols))
        for row in rows:
            print(",".join(format(x, ".9g") for x in row))
    else:
        widths = [max(len(c), 12) for c in cols]
        print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
        for row in rows:
            print("  ".join(format(x, ".6f").rjust(w) for x, w in zip(row, widths)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as e:
        return _fail(str(e))
    trace = run(sc)
    if args.out:
        write_trace_csv(trace, args.out)
    status = "collision at t={:.3f} s".format(trace.collision_time) if trace.collided \
        else "clean"
    print(f"steps={trace.n_steps} min_gap={trace.min_gap:.6f} m "
          f"final_gap={trace.final_gap:.6f} m [{status}]")
    return EXIT_COLLISION if trace.collided else EXIT_OK


def cmd_verify(args) -> int:
    try:
        p, _latency = _resolve_params(args.params)
    except ScenarioError as e:
        return _fail(str(e))
    if args.n < 1:
        return _fail("--n must be >= 1")
    report = verify_no_collision(args.n, args.seed, p, dt=args.dt, horizon=args.horizon)
    counts, edges = report.histogram(bins=20)
    print(f"scenarios: {report.n}")
    print(f"collisions: {report.n_collisions}")
    print(f"min gap overall: {report.min_gap_overall:.6f} m")
    print("min-gap histogram (m):")
    for c, lo, hi in zip(counts, edges, edges[1:]):
        print(f"  [{lo:10.3f}, {hi:10.3f})  {c}")
    if report.passed:
        print("PASS: no collisions")
        return EXIT_OK
    print("FAIL: collision scenarios " + ", ".join(map(str, report.collision_indices[:10])))
    if report.counterexample is not None:
        out = args.counterexample_out or "counterexample_trace.csv"
        write_trace_csv(report.counterexample, out)
        print(f"counterexample trace written to {out}")
    return EXIT_VERIFY_FAIL


def _sweep_common(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as e:
        return _fail(str(e))
    arms = tuple(s.strip() for s in args.paired_controllers.split(",") if s.strip())
    if not arms:
        return _fail("--paired-controllers must name at least one arm")
    axes = None
    if args.axis:
        axes = {}
        for spec in args.axis:
            try:
                axis, values = _parse_grid(spec)
            except ValueError as e:
                return _fail(str(e))
            axes[axis] = [float(v) for v in values]
    try:
        results = sweep(sc, n=args.n, seed=args.seed, paired_controllers=arms,
                        p_fail=args.p_fail, axes=axes)
    except ValueError as e:
        return _fail(str(e))
    report = {
        arm: {
            "n_scenarios": r.n_scenarios,
            "n_dangerous_episodes": r.n_dangerous_episodes,
            "n_collisions": r.n_collisions,
            "n_interventions": r.n_interventions,
            "n_suppressed": r.n_suppressed,
            "max_commanded_jerk": r.max_commanded_jerk,
            "max_commanded_decel": r.max_commanded_decel,
            "elimination_rate": r.elimination_rate,
            "baseline_arm": r.baseline_arm,
        }
        for arm, r in results.items()
    }
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="apbsim",
        description="Longitudinal vehicle-safety toolkit: safe distances, "
                    "preventive-braking simulation, and verification runs.",
        epilog=f"bundled presets: {', '.join(list_presets())}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sd = sub.add_parser("safe-distance", help="print safe distances for a point or grid")
    sd.add_argument("--params", help="parameter file (default: $APBSIM_PARAMS or 'defaults')")
    sd.add_argument("--v-rear", type=float, default=0.0)
    sd.add_argument("--v-front", type=float, default=0.0)
    sd.add_argument("--a-rear", type=float, default=0.0)
    sd.add_argument("--grid", action="append",
                    help="axis=lo:hi:step over v_rear, v_front or a_rear (repeatable)")
    sd.add_argument("--classic", action="store_true",
                    help="also print the response-time-based classic variant")
    sd.add_argument("--format", choices=("table", "csv"), default="table")
    sd.set_defaults(fn=cmd_safe_distance)

    sim_p = sub.add_parser("simulate", help="run one scenario and emit a trace")
    sim_p.add_argument("--scenario", required=True, help="scenario file or preset name")
    sim_p.add_argument("--out", help="trace CSV output path")
    sim_p.set_defaults(fn=cmd_simulate)

    ver = sub.add_parser("verify", help="empirical no-collision verification")
    ver.add_argument("--params", help="parameter file (default: $APBSIM_PARAMS or 'defaults')")
    ver.add_argument("--n", type=int, required=True)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--dt", type=float, default=0.01)
    ver.add_argument("--horizon", type=float, default=12.0)
    ver.add_argument("--counterexample-out", help="trace path on failure")
    ver.set_defaults(fn=cmd_verify)

    for name, help_text in (("sweep", "paired Monte Carlo sweep over a scenario population"),
                            ("compare", "alias for a paired sweep")):
        sw = sub.add_parser(name, help=help_text)
        sw.add_argument("--scenario", required=True)
        sw.add_argument("--n", type=int, default=1000)
        sw.add_argument("--seed", type=int, default=0)
        sw.add_argument("--paired-controllers", default="none,apb",
                        help="comma-separated arms: none, apb, aeb")
        sw.add_argument("--p-fail", type=float, default=None)
        sw.add_argument("--axis", action="append",
                        help="dotted.path=lo:hi:step grid override (repeatable)")
        sw.add_argument("--out", help="JSON report path")
        sw.set_defaults(fn=_sweep_common)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
