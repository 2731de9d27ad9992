"""Scenario and trace file formats, plus the bundled presets.

Scenario files are JSON documents with the sections below; unknown keys
are rejected everywhere and every optional field has a documented
default (all units SI):

    params       rho=0, a_max_brake=8, a_min_brake=4, a_max_accel=2,
                 j_max=2, ceiling=15, latency=0
    initial      required: gap_m, rear {v, a=0}, front {v, a=0}
    front_script [] (list of {t, accel} switch points, held until the
                 next switch) or {"adversarial": {"seed", "compliant"=true}}
    driver       {"type": "constant_speed"} (default)
                 | {"type": "tailgater", "target_gap"=2, "gain"=0.5}
                 | {"type": "distracted", "reaction_delay"=1.5,
                    "comfort_decel"=3}
    controller   {"type": "none"} (default)
                 | {"type": "apb", "override_from"=null}
                 | {"type": "aeb", "ttc_threshold"=2, "brake_magnitude"=14.7}
    p_fail       0 (per-dangerous-episode intervention failure probability)
    sensor       range_noise_sigma=0, miss_rate=0, ghost_rate=0, ghost_gap=15
    sim          dt=0.01, horizon=10, seed=0
    population   optional Monte Carlo ranges, see PopulationSpec

Trace files are flat CSV tables with '#'-prefixed header lines so the
body loads directly into any table reader; floats are written with nine
significant digits and identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .controllers import AebConfig, ConstantSpeed, DistractedFollower, Tailgater
from .params import KinematicState, RssParams
from .safety import SceneState
from .sim import (
    AdversarialSpec,
    AebControl,
    ApbControl,
    NoControl,
    PopulationSpec,
    Scenario,
    SensorModel,
    Trace,
)

TRACE_COLUMNS = ("t", "x_r", "v_r", "a_r", "x_f", "v_f", "a_f",
                 "gap", "d_safe", "dangerous", "mode", "cmd_accel")


class ScenarioError(ValueError):
    """Schema violation with a field-level location."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


_REQUIRED = object()


def _check_keys(doc: dict, ctx: str, allowed: set[str]):
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(ctx, f"unknown key(s) {sorted(unknown)}")


def _num(doc: dict, ctx: str, key: str, default=_REQUIRED) -> float:
    if key not in doc:
        if default is _REQUIRED:
            raise ScenarioError(f"{ctx}.{key}", "required field missing")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"{ctx}.{key}", f"expected a number, got {val!r}")
    return float(val)


def _parse_params(doc: dict, ctx: str = "params") -> tuple[RssParams, float]:
    _check_keys(doc, ctx, {"rho", "a_max_brake", "a_min_brake", "a_max_accel",
                           "j_max", "ceiling", "latency"})
    try:
        p = RssParams(
            rho=_num(doc, ctx, "rho", 0.0),
            a_max_brake=_num(doc, ctx, "a_max_brake", 8.0),
            a_min_brake=_num(doc, ctx, "a_min_brake", 4.0),
            a_max_accel=_num(doc, ctx, "a_max_accel", 2.0),
            j_max=_num(doc, ctx, "j_max", 2.0),
            ceiling=_num(doc, ctx, "ceiling", 15.0),
        )
    except ValueError as e:
        raise ScenarioError(ctx, str(e)) from e
    latency = _num(doc, ctx, "latency", 0.0)
    if latency < 0.0:
        raise ScenarioError(f"{ctx}.latency", "must be >= 0")
    return p, latency


def _parse_state(doc: dict, ctx: str) -> tuple[float, float]:
    _check_keys(doc, ctx, {"v", "a"})
    return _num(doc, ctx, "v"), _num(doc, ctx, "a", 0.0)


def parse_scenario(doc: dict) -> Scenario:
    """Validate a scenario document and build the in-memory scenario.

    Raises:
        ScenarioError: with the offending field path on any violation.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    _check_keys(doc, "<root>", {"params", "initial", "front_script", "driver",
                                "controller", "p_fail", "sensor", "sim", "population"})
    p, latency = _parse_params(doc.get("params", {}))

    init = doc.get("initial")
    if init is None:
        raise ScenarioError("initial", "required section missing")
    _check_keys(init, "initial", {"gap_m", "rear", "front"})
    gap = _num(init, "initial", "gap_m")
    if "rear" not in init or "front" not in init:
        raise ScenarioError("initial", "rear and front states are required")
    v_r, a_r = _parse_state(init["rear"], "initial.rear")
    v_f, a_f = _parse_state(init["front"], "initial.front")
    try:
        initial = SceneState(KinematicState(0.0, v_r, a_r),
                             KinematicState(gap, v_f, a_f), gap)
    except ValueError as e:
        raise ScenarioError("initial", str(e)) from e

    script: tuple = ()
    adversarial = None
    fs = doc.get("front_script", [])
    if isinstance(fs, dict):
        _check_keys(fs, "front_script", {"adversarial"})
        adv = fs.get("adversarial")
        if adv is None:
            raise ScenarioError("front_script", "expected {'adversarial': {...}}")
        _check_keys(adv, "front_script.adversarial", {"seed", "compliant"})
        seed = adv.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ScenarioError("front_script.adversarial.seed", "expected an integer")
        compliant = adv.get("compliant", True)
        if not isinstance(compliant, bool):
            raise ScenarioError("front_script.adversarial.compliant", "expected a boolean")
        adversarial = AdversarialSpec(seed=seed, compliant=compliant)
    elif isinstance(fs, list):
        segs = []
        for i, seg in enumerate(fs):
            ctx = f"front_script[{i}]"
            if not isinstance(seg, dict):
                raise ScenarioError(ctx, "expected an object {t, accel}")
            _check_keys(seg, ctx, {"t", "accel"})
            t = _num(seg, ctx, "t")
            a = _num(seg, ctx, "accel")
            if t < 0.0:
                raise ScenarioError(f"{ctx}.t", "must be >= 0")
            if abs(a) > p.ceiling + 1e-9:
                raise ScenarioError(f"{ctx}.accel", f"|accel| exceeds the ceiling {p.ceiling}")
            segs.append((t, a))
        script = tuple(segs)
    else:
        raise ScenarioError("front_script", "expected a list of segments or an adversarial spec")

    drv_doc = doc.get("driver", {"type": "constant_speed"})
    kind = drv_doc.get("type")
    if kind == "constant_speed":
        _check_keys(drv_doc, "driver", {"type"})
        driver = ConstantSpeed()
    elif kind == "tailgater":
        _check_keys(drv_doc, "driver", {"type", "target_gap", "gain"})
        driver = Tailgater(target_gap=_num(drv_doc, "driver", "target_gap", 2.0),
                           gain=_num(drv_doc, "driver", "gain", 0.5))
    elif kind == "distracted":
        _check_keys(drv_doc, "driver", {"type", "reaction_delay", "comfort_decel"})
        driver = DistractedFollower(
            reaction_delay=_num(drv_doc, "driver", "reaction_delay", 1.5),
            comfort_decel=_num(drv_doc, "driver", "comfort_decel", 3.0),
        )
    else:
        raise ScenarioError("driver.type",
                            f"expected constant_speed | tailgater | distracted, got {kind!r}")

    ctl_doc = doc.get("controller", {"type": "none"})
    kind = ctl_doc.get("type")
    if kind == "none":
        _check_keys(ctl_doc, "controller", {"type"})
        controller = NoControl()
    elif kind == "apb":
        _check_keys(ctl_doc, "controller", {"type", "override_from"})
        ov = ctl_doc.get("override_from")
        if ov is not None and (isinstance(ov, bool) or not isinstance(ov, (int, float))):
            raise ScenarioError("controller.override_from", "expected a number or null")
        controller = ApbControl(latency=latency,
                                override_from=float(ov) if ov is not None else None)
    elif kind == "aeb":
        _check_keys(ctl_doc, "controller", {"type", "ttc_threshold", "brake_magnitude"})
        try:
            cfg = AebConfig(
                ttc_threshold=_num(ctl_doc, "controller", "ttc_threshold", 2.0),
                brake_magnitude=_num(ctl_doc, "controller", "brake_magnitude", 14.7),
            )
        except ValueError as e:
            raise ScenarioError("controller", str(e)) from e
        controller = AebControl(config=cfg)
    else:
        raise ScenarioError("controller.type", f"expected none | apb | aeb, got {kind!r}")

    sens_doc = doc.get("sensor", {})
    _check_keys(sens_doc, "sensor", {"range_noise_sigma", "miss_rate", "ghost_rate", "ghost_gap"})
    try:
        sensor = SensorModel(
            range_noise_sigma=_num(sens_doc, "sensor", "range_noise_sigma", 0.0),
            miss_rate=_num(sens_doc, "sensor", "miss_rate", 0.0),
            ghost_rate=_num(sens_doc, "sensor", "ghost_rate", 0.0),
            ghost_gap=_num(sens_doc, "sensor", "ghost_gap", 15.0),
        )
    except ValueError as e:
        raise ScenarioError("sensor", str(e)) from e

    sim_doc = doc.get("sim", {})
    _check_keys(sim_doc, "sim", {"dt", "horizon", "seed"})
    seed = sim_doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("sim.seed", "expected an integer")

    population = None
    pop_doc = doc.get("population")
    if pop_doc is not None:
        _check_keys(pop_doc, "population",
                    {"v_rear", "v_front", "match_front_to_rear", "gap", "gap_safe_plus",
                     "brake_t", "brake_decel", "brake_duration"})
        population = PopulationSpec(
            v_rear=_parse_range(pop_doc, "population", "v_rear"),
            v_front=_parse_range(pop_doc, "population", "v_front"),
            match_front_to_rear=bool(pop_doc.get("match_front_to_rear", False)),
            gap=_parse_range(pop_doc, "population", "gap"),
            gap_safe_plus=_parse_range(pop_doc, "population", "gap_safe_plus"),
            brake_t=_parse_range(pop_doc, "population", "brake_t"),
            brake_decel=_parse_range(pop_doc, "population", "brake_decel"),
            brake_duration=_parse_range(pop_doc, "population", "brake_duration"),
        )

    p_fail = _num(doc, "<root>", "p_fail", 0.0)
    try:
        return Scenario(
            params=p,
            initial=initial,
            front_script=script,
            adversarial=adversarial,
            driver=driver,
            controller=controller,
            p_fail=p_fail,
            sensor=sensor,
            dt=_num(sim_doc, "sim", "dt", 0.01),
            horizon=_num(sim_doc, "sim", "horizon", 10.0),
            seed=seed,
            population=population,
        )
    except ValueError as e:
        raise ScenarioError("sim", str(e)) from e


def _parse_range(doc: dict, ctx: str, key: str):
    val = doc.get(key)
    if val is None:
        return None
    if (not isinstance(val, list) or len(val) != 2
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in val)):
        raise ScenarioError(f"{ctx}.{key}", "expected [lo, hi]")
    return (float(val[0]), float(val[1]))


def serialize_scenario(sc: Scenario) -> dict:
    """Inverse of ``parse_scenario``; round-trips exactly."""
    doc: dict = {
        "params": {
            "rho": sc.params.rho,
            "a_max_brake": sc.params.a_max_brake,
            "a_min_brake": sc.params.a_min_brake,
            "a_max_accel": sc.params.a_max_accel,
            "j_max": sc.params.j_max,
            "ceiling": sc.params.ceiling,
            "latency": sc.controller.latency if isinstance(sc.controller, ApbControl) else 0.0,
        },
        "initial": {
            "gap_m": sc.initial.gap,
            "rear": {"v": sc.initial.rear.v, "a": sc.initial.rear.a},
            "front": {"v": sc.initial.front.v, "a": sc.initial.front.a},
        },
        "p_fail": sc.p_fail,
        "sensor": {
            "range_noise_sigma": sc.sensor.range_noise_sigma,
            "miss_rate": sc.sensor.miss_rate,
            "ghost_rate": sc.sensor.ghost_rate,
            "ghost_gap": sc.sensor.ghost_gap,
        },
        "sim": {"dt": sc.dt, "horizon": sc.horizon, "seed": sc.seed},
    }
    if sc.adversarial is not None:
        doc["front_script"] = {"adversarial": {"seed": sc.adversarial.seed,
                                               "compliant": sc.adversarial.compliant}}
    else:
        doc["front_script"] = [{"t": t, "accel": a} for (t, a) in sc.front_script]
    d = sc.driver
    if isinstance(d, ConstantSpeed):
        doc["driver"] = {"type": "constant_speed"}
    elif isinstance(d, Tailgater):
        doc["driver"] = {"type": "tailgater", "target_gap": d.target_gap, "gain": d.gain}
    else:
        doc["driver"] = {"type": "distracted", "reaction_delay": d.reaction_delay,
                         "comfort_decel": d.comfort_decel}
    c = sc.controller
    if isinstance(c, NoControl):
        doc["controller"] = {"type": "none"}
    elif isinstance(c, ApbControl):
        doc["controller"] = {"type": "apb", "override_from": c.override_from}
    else:
        doc["controller"] = {"type": "aeb", "ttc_threshold": c.config.ttc_threshold,
                             "brake_magnitude": c.config.brake_magnitude}
    if sc.population is not None:
        pop = {}
        for key in ("v_rear", "v_front", "gap", "gap_safe_plus",
                    "brake_t", "brake_decel", "brake_duration"):
            val = getattr(sc.population, key)
            if val is not None:
                pop[key] = list(val)
        if sc.population.match_front_to_rear:
            pop["match_front_to_rear"] = True
        doc["population"] = pop
    return doc


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a file path or a bundled preset name."""
    path = Path(source)
    if not path.exists():
        preset = preset_path(str(source))
        if preset is None:
            raise ScenarioError("<file>", f"no such scenario file or preset: {source}")
        path = preset
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError("<file>", f"invalid JSON in {path}: {e}") from e
    return parse_scenario(doc)


def save_scenario(sc: Scenario, path: str | Path):
    Path(path).write_text(json.dumps(serialize_scenario(sc), indent=2) + "\n")


def load_params(source: str | Path) -> tuple[RssParams, float]:
    """Load a bare parameter file; returns (params, latency)."""
    path = Path(source)
    if not path.exists():
        preset = preset_path(str(source))
        if preset is None:
            raise ScenarioError("<file>", f"no such parameter file or preset: {source}")
        path = preset
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError("<file>", f"invalid JSON in {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "parameter file must be a JSON object")
    return _parse_params(doc, ctx="<params>")


def list_presets() -> list[str]:
    pkg = resources.files("apbsim") / "presets"
    return sorted(f.name[:-5] for f in pkg.iterdir() if f.name.endswith(".json"))


def preset_path(name: str) -> Path | None:
    if any(sep in name for sep in "/\\"):
        return None
    stem = name[:-5] if name.endswith(".json") else name
    candidate = resources.files("apbsim") / "presets" / f"{stem}.json"
    try:
        if candidate.is_file():
            return Path(str(candidate))
    except (OSError, TypeError):
        return None
    return None


# --- trace emission ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def trace_lines(trace: Trace) -> list[str]:
    p = trace.params
    lines = [
        "# apbsim trace v1",
        f"# scenario_hash: {trace.scenario_hash}",
        f"# seed: {trace.seed}",
        ("# params: rho={} a_max_brake={} a_min_brake={} a_max_accel={} "
         "j_max={} ceiling={}").format(*(_fmt(v) for v in (
             p.rho, p.a_max_brake, p.a_min_brake, p.a_max_accel, p.j_max, p.ceiling))),
        f"# dt: {_fmt(trace.dt)}",
    ]
    for ev in trace.events:
        lines.append(f"# event: {ev.kind} t={_fmt(ev.t)}")
    lines.append(f"# min_gap: {_fmt(trace.min_gap)}")
    lines.append(",".join(TRACE_COLUMNS))
    for i in range(trace.n_steps):
        row = [
            _fmt(trace.t[i]), _fmt(trace.x_r[i]), _fmt(trace.v_r[i]), _fmt(trace.a_r[i]),
            _fmt(trace.x_f[i]), _fmt(trace.v_f[i]), _fmt(trace.a_f[i]),
            _fmt(trace.gap[i]), _fmt(trace.d_safe[i]),
            "1" if trace.dangerous[i] else "0",
            str(int(trace.mode[i])), _fmt(trace.cmd_accel[i]),
        ]
        lines.append(",".join(row))
    return lines


def write_trace_csv(trace: Trace, path: str | Path):
    Path(path).write_text("\n".join(trace_lines(trace)) + "\n")
