"""Deterministic two-car longitudinal simulator and verification harness.

``run`` is the reference engine: a readable, exactly-integrating
closed-loop simulation of one scenario that records a full trace.
``verify_no_collision`` and ``sweep`` drive the jitted batch kernel in
``engine`` for large scenario counts; the test suite pins the two
engines to each other on random scenarios.

Conventions: the rear car starts at x = 0 and the front car at
x = gap (car lengths are folded into the gap when the scenario is
built), so ``gap == x_f - x_r`` at all times. A collision is a gap at or
below ``-engine.COLLISION_EPS`` at any decision instant or inside a step.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import engine
from .controllers import (
    AebConfig,
    AebController,
    ApbController,
    ConstantSpeed,
    DistractedFollower,
    DriverMemory,
    DriverPolicy,
    FailureWrapper,
    Mode,
    PassthroughController,
    Tailgater,
    driver_step,
    with_failure,
)
from .params import KinematicState, RssParams
from .safety import SceneState

FAR_GAP = 1e9  # stands in for "no front car detected"

FrontScript = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class AdversarialSpec:
    """Generate the front script from a seed instead of listing segments."""

    seed: int
    compliant: bool = True


@dataclass(frozen=True)
class NoControl:
    pass


@dataclass(frozen=True)
class ApbControl:
    latency: float = 0.0
    override_from: float | None = None


@dataclass(frozen=True)
class AebControl:
    config: AebConfig = AebConfig()


ControlSetup = Union[NoControl, ApbControl, AebControl]


@dataclass(frozen=True)
class SensorModel:
    """Controller-side sensing defects; ground truth always drives physics."""

    range_noise_sigma: float = 0.0
    miss_rate: float = 0.0
    ghost_rate: float = 0.0
    ghost_gap: float = 15.0

    def __post_init__(self):
        for name in ("miss_rate", "ghost_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must be a probability, got {r}")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")
        if self.ghost_gap <= 0.0:
            raise ValueError("ghost_gap must be > 0")

    @property
    def active(self) -> bool:
        return self.range_noise_sigma > 0.0 or self.miss_rate > 0.0 or self.ghost_rate > 0.0


@dataclass(frozen=True)
class PopulationSpec:
    """Per-index randomization used by Monte Carlo sweeps.

    Ranges are uniform [lo, hi]. ``gap_safe_plus`` draws the initial gap
    as the safe distance of the drawn speeds plus a uniform surplus. When
    the ``brake_*`` ranges are set, the front script becomes a single
    braking event: onset time, deceleration magnitude and duration drawn
    from the ranges, constant speed before and after.
    """

    v_rear: tuple[float, float] | None = None
    v_front: tuple[float, float] | None = None
    match_front_to_rear: bool = False
    gap: tuple[float, float] | None = None
    gap_safe_plus: tuple[float, float] | None = None
    brake_t: tuple[float, float] | None = None
    brake_decel: tuple[float, float] | None = None
    brake_duration: tuple[float, float] | None = None


@dataclass(frozen=True)
class Scenario:
    params: RssParams = RssParams()
    initial: SceneState = SceneState(
        rear=KinematicState(0.0, 20.0, 0.0),
        front=KinematicState(50.0, 20.0, 0.0),
        gap=50.0,
    )
    front_script: FrontScript = ()
    adversarial: AdversarialSpec | None = None
    driver: DriverPolicy = ConstantSpeed()
    controller: ControlSetup = NoControl()
    p_fail: float = 0.0
    sensor: SensorModel = SensorModel()
    dt: float = 0.01
    horizon: float = 10.0
    seed: int = 0
    population: PopulationSpec | None = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.horizon < self.dt:
            raise ValueError("horizon must be >= dt")
        if not 0.0 <= self.p_fail <= 1.0:
            raise ValueError("p_fail must be a probability")
        if self.adversarial is not None and self.front_script:
            raise ValueError("give either front_script or adversarial, not both")


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # danger_onset | danger_exit | intervention_start | intervention_end
    #            collision | rear_standstill | mutual_standstill
    t: float


@dataclass
class Trace:
    """Step-by-step record of one run; one row per decision instant."""

    scenario_hash: str
    seed: int
    params: RssParams
    dt: float
    t: np.ndarray
    x_r: np.ndarray
    v_r: np.ndarray
    a_r: np.ndarray
    x_f: np.ndarray
    v_f: np.ndarray
    a_f: np.ndarray
    gap: np.ndarray
    d_safe: np.ndarray
    dangerous: np.ndarray
    mode: np.ndarray
    cmd_accel: np.ndarray
    events: list[TraceEvent]
    collided: bool
    collision_time: float | None
    min_gap: float
    final_gap: float
    n_suppressed: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.t)


def scenario_hash(sc: Scenario) -> str:
    """Stable content hash used to stamp trace files."""
    from .scenario_io import serialize_scenario

    doc = json.dumps(serialize_scenario(sc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


# --- front behavior scripts ---------------------------------------------

def worst_case_front_script(p: RssParams) -> FrontScript:
    """Immediate sustained braking at the front's worst-case magnitude."""
    return ((0.0, -p.a_max_brake),)


def _adversarial_script(rng: np.random.Generator, p: RssParams, horizon: float,
                        compliant: bool, dt: float) -> FrontScript:
    if rng.random() < 0.05:
        # force full worst-case coverage now and then
        return worst_case_front_script(p)
    lo = -p.a_max_brake if compliant else -p.ceiling
    hi = p.a_max_accel
    segs = []
    t = 0.0
    while t < horizon:
        dur = max(dt, round(rng.uniform(0.1, 3.0) / dt) * dt)
        segs.append((t, rng.uniform(lo, hi)))
        t += dur
    return tuple(segs)


def adversarial_front(seed: int, p: RssParams, horizon: float,
                      compliant: bool = True, dt: float = 0.01) -> FrontScript:
    """Random piecewise-constant front accelerations exploring the worst case.

    Segment lengths are 0.1-3 s (snapped to the decision grid); values
    stay within [-a_max_brake, a_max_accel] when ``compliant``, otherwise
    braking may reach the physical ceiling. With probability 0.05 the
    whole script is the single sustained worst-case brake segment.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be > 0")
    rng = np.random.default_rng(seed)
    return _adversarial_script(rng, p, horizon, compliant, dt)


def resolve_front_script(sc: Scenario) -> FrontScript:
    if sc.adversarial is not None:
        return adversarial_front(sc.adversarial.seed, sc.params, sc.horizon,
                                 sc.adversarial.compliant, sc.dt)
    return tuple(sorted(sc.front_script, key=lambda seg: seg[0]))


# --- single exact step ------------------------------------------------------

@dataclass(frozen=True)
class RampCommand:
    """A jerk-ramped brake command: a(s) = max(a_start - jerk*s, floor)."""

    a_start: float
    jerk: float
    floor: float


def step(scene: SceneState, rear_cmd, front_accel: float, dt: float):
    """Advance both cars one decision step under resolved commands.

    ``rear_cmd`` is either a signed acceleration held for the step or a
    ``RampCommand``; the front holds ``front_accel``. Integration is
    exact (piecewise polynomial with the velocity clamped at zero), so
    dt carries no discretization error. Returns
    ``(scene', min_gap_within_step, collision_time_or_None)``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if isinstance(rear_cmd, RampCommand):
        r_hi, r_r0, r_j, r_lo = math.inf, rear_cmd.a_start, rear_cmd.jerk, rear_cmd.floor
    else:
        r_hi = r_r0 = r_lo = float(rear_cmd)
        r_j = 0.0
    dxr, v_r, a_r, dxf, v_f, a_f, min_gap, t_coll = engine.step_pair(
        scene.gap, scene.rear.v, r_hi, r_r0, r_j, r_lo, scene.front.v, front_accel, dt
    )
    new = SceneState(
        rear=KinematicState(scene.rear.x + dxr, v_r, a_r),
        front=KinematicState(scene.front.x + dxf, v_f, a_f),
        gap=scene.gap + dxf - dxr,
    )
    return new, min_gap, (t_coll if t_coll >= 0.0 else None)


# --- sensing --------------------------------------------------------------

def _observe(scene: SceneState, sensor: SensorModel, rng: np.random.Generator) -> SceneState:
    """The controller's view of the scene, after sensing defects."""
    if not sensor.active:
        return scene
    miss_u = rng.random()
    ghost_u = rng.random()
    noise = rng.normal(0.0, 1.0) * sensor.range_noise_sigma
    obs_gap = None
    obs_front = None
    if miss_u >= sensor.miss_rate:
        obs_gap = scene.gap + noise
        obs_front = scene.front
    if ghost_u < sensor.ghost_rate:
        if obs_gap is None or sensor.ghost_gap < obs_gap:
            obs_gap = sensor.ghost_gap
            obs_front = KinematicState(scene.rear.x + sensor.ghost_gap, 0.0, 0.0)
    if obs_gap is None:
        return SceneState(scene.rear, KinematicState(scene.rear.x + FAR_GAP, scene.rear.v, 0.0),
                          FAR_GAP)
    return SceneState(scene.rear, obs_front, obs_gap)


# --- the reference simulator ----------------------------------------------

def _build_controller(sc: Scenario):
    if isinstance(sc.controller, NoControl):
        ctrl = PassthroughController()
    elif isinstance(sc.controller, ApbControl):
        lookahead = max(sc.controller.latency, sc.dt)
        ctrl = ApbController(sc.params, lookahead=lookahead)
    elif isinstance(sc.controller, AebControl):
        ctrl = AebController(sc.controller.config)
    else:
        raise TypeError(f"unknown controller setup {sc.controller!r}")
    if sc.p_fail > 0.0 and not isinstance(sc.controller, NoControl):
        fail_seed = int(np.random.SeedSequence(sc.seed).generate_state(2)[1])
        ctrl = with_failure(ctrl, sc.p_fail, fail_seed)
    return ctrl


def _apb_state(ctrl):
    inner = ctrl.inner if isinstance(ctrl, FailureWrapper) else ctrl
    return inner.state if isinstance(inner, ApbController) else None


def run(scenario: Scenario) -> Trace:
    """Simulate one scenario; deterministic given the scenario (incl. seeds).

    Terminates at the horizon, at a collision, or at mutual standstill
    with no future input that could move either car again.
    """
    sc = scenario
    p = sc.params
    script = resolve_front_script(sc)
    sensor_rng = np.random.default_rng(np.random.SeedSequence(sc.seed).spawn(1)[0])
    ctrl = _build_controller(sc)
    is_apb = isinstance(sc.controller, ApbControl)
    is_aeb = isinstance(sc.controller, AebControl)
    override_from = sc.controller.override_from if is_apb else None

    n_steps = max(1, int(round(sc.horizon / sc.dt)))
    cols = {name: np.zeros(n_steps) for name in
            ("t", "x_r", "v_r", "a_r", "x_f", "v_f", "a_f", "gap", "d_safe", "cmd_accel")}
    dangerous = np.zeros(n_steps, dtype=bool)
    mode_col = np.zeros(n_steps, dtype=np.int8)

    x_r, v_r, a_r = 0.0, sc.initial.rear.v, sc.initial.rear.a
    x_f, v_f, a_f_meas = sc.initial.gap, sc.initial.front.v, sc.initial.front.a
    a_f_cur = sc.initial.front.a
    script_accels = [a for (_, a) in script]
    sufmax = np.full(len(script) + 1, -np.inf)
    for i in range(len(script) - 1, -1, -1):
        sufmax[i] = max(script_accels[i], sufmax[i + 1])
    sp = 0
    mem = DriverMemory()

    min_gap = sc.initial.gap
    collided = False
    collision_time = None
    rows = 0
    end_reason = "horizon"

    if sc.initial.gap <= -engine.COLLISION_EPS:
        collided = True
        collision_time = 0.0

    for k in range(n_steps):
        if collided:
            break
        t = k * sc.dt
        gap = x_f - x_r
        while sp < len(script) and script[sp][0] <= t:
            a_f_cur = script[sp][1]
            sp += 1
        scene = SceneState(KinematicState(x_r, v_r, a_r),
                           KinematicState(x_f, v_f, a_f_meas), gap)
        a_d = driver_step(sc.driver, scene, t, mem)
        a_d = float(np.clip(a_d, -p.ceiling, p.ceiling))

        if (v_r <= 1e-12 and v_f <= 1e-12 and a_d <= 0.0 and a_f_cur <= 0.0
                and (sp >= len(script) or sufmax[sp] <= 0.0)):
            end_reason = "mutual_standstill"
            break

        obs = _observe(scene, sc.sensor, sensor_rng)
        override = override_from is not None and t >= override_from
        cmd = ctrl.step(obs, a_d, t, override)

        # reporting columns use the instantaneous classification
        d_safe = engine.apb_safe_distance(v_r, min(a_r, 0.0), v_f,
                                          p.j_max, p.a_min_brake, p.a_max_brake)
        danger_now = gap < d_safe

        apb_state = _apb_state(ctrl) if is_apb else None
        if apb_state is not None and apb_state.mode is Mode.INTERVENING:
            if a_d <= -p.a_min_brake:
                r_hi = r_r0 = r_lo = a_d
                r_j = 0.0
            else:
                r_hi = a_d
                r_r0 = apb_state.a_onset - p.j_max * (t - apb_state.onset_time)
                r_j = p.j_max
                r_lo = -p.a_min_brake
            mode_code = 1
        else:
            r_hi = r_r0 = r_lo = cmd
            r_j = 0.0
            if is_apb:
                mode_code = apb_state.mode.value if apb_state is not None else 0
            elif is_aeb:
                mode_code = 1 if ctrl_latched(ctrl) else 0
            else:
                mode_code = 0

        for name, val in (("t", t), ("x_r", x_r), ("v_r", v_r), ("a_r", a_r),
                          ("x_f", x_f), ("v_f", v_f), ("a_f", a_f_meas),
                          ("gap", gap), ("d_safe", d_safe), ("cmd_accel", cmd)):
            cols[name][k] = val
        dangerous[k] = danger_now
        mode_col[k] = mode_code
        rows = k + 1

        dxr, v_r2, a_r2, dxf, v_f2, a_f2, mg, t_c = engine.step_pair(
            gap, v_r, r_hi, r_r0, r_j, r_lo, v_f, a_f_cur, sc.dt
        )
        min_gap = min(min_gap, mg)
        if t_c >= 0.0:
            collided = True
            collision_time = t + t_c
            dxr, v_r, _ = engine.advance(0.0, v_r, r_hi, r_r0, r_j, r_lo, t_c)
            dxf, v_f, _ = engine.advance(0.0, v_f, a_f_cur, a_f_cur, 0.0, a_f_cur, t_c)
            x_r += dxr
            x_f += dxf
            break
        x_r += dxr
        v_r, a_r = v_r2, a_r2
        x_f += dxf
        v_f, a_f_meas = v_f2, a_f2

    for name in cols:
        cols[name] = cols[name][:rows]
    dangerous = dangerous[:rows]
    mode_col = mode_col[:rows]

    events = _derive_events(cols["t"], dangerous, mode_col, cols["v_r"],
                            collided, collision_time, end_reason)
    return Trace(
        scenario_hash=scenario_hash(sc),
        seed=sc.seed,
        params=p,
        dt=sc.dt,
        t=cols["t"], x_r=cols["x_r"], v_r=cols["v_r"], a_r=cols["a_r"],
        x_f=cols["x_f"], v_f=cols["v_f"], a_f=cols["a_f"],
        gap=cols["gap"], d_safe=cols["d_safe"], dangerous=dangerous,
        mode=mode_col, cmd_accel=cols["cmd_accel"],
        events=events,
        collided=collided,
        collision_time=collision_time,
        min_gap=min_gap,
        final_gap=x_f - x_r,
        n_suppressed=ctrl.n_suppressed if isinstance(ctrl, FailureWrapper) else 0,
    )


def ctrl_latched(ctrl) -> bool:
    inner = ctrl.inner if isinstance(ctrl, FailureWrapper) else ctrl
    return isinstance(inner, AebController) and inner.state.latched


def _derive_events(t, dangerous, mode, v_r, collided, collision_time, end_reason):
    events: list[TraceEvent] = []
    for i in range(len(t)):
        if dangerous[i] and (i == 0 or not dangerous[i - 1]):
            events.append(TraceEvent("danger_onset", float(t[i])))
        if not dangerous[i] and i > 0 and dangerous[i - 1]:
            events.append(TraceEvent("danger_exit", float(t[i])))
        if mode[i] == 1 and (i == 0 or mode[i - 1] != 1):
            events.append(TraceEvent("intervention_start", float(t[i])))
        if mode[i] != 1 and i > 0 and mode[i - 1] == 1:
            events.append(TraceEvent("intervention_end", float(t[i])))
        if v_r[i] <= 1e-12 and (i == 0 or v_r[i - 1] > 1e-12):
            events.append(TraceEvent("rear_standstill", float(t[i])))
    if collided:
        events.append(TraceEvent("collision", float(collision_time)))
    elif end_reason == "mutual_standstill" and len(t):
        events.append(TraceEvent("mutual_standstill", float(t[-1])))
    events.sort(key=lambda e: (e.t, e.kind))
    return events


# --- batch execution -------------------------------------------------------

_DRIVER_CODE = {ConstantSpeed: engine.DRIVER_CONSTANT, Tailgater: engine.DRIVER_TAILGATER,
                DistractedFollower: engine.DRIVER_DISTRACTED}


def _kernel_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


def kernel_eligible(sc: Scenario) -> bool:
    """The jitted kernel covers sensor-free scenarios without overrides
    (and failure injection only for APB)."""
    if sc.sensor.active:
        return False
    if isinstance(sc.controller, ApbControl) and sc.controller.override_from is not None:
        return False
    if isinstance(sc.controller, AebControl) and sc.p_fail > 0.0:
        return False
    return True


@dataclass
class BatchResult:
    status: np.ndarray
    min_gap: np.ndarray
    coll_t: np.ndarray
    end_t: np.ndarray
    final_gap: np.ndarray
    n_eps: np.ndarray
    n_int: np.ndarray
    n_sup: np.ndarray
    max_dec: np.ndarray
    max_jerk_step: np.ndarray


def run_batch(scenarios: list[Scenario]) -> BatchResult:
    """Run many scenarios through the jitted kernel (aggregates only).

    All scenarios must share dt and horizon and be ``kernel_eligible``.
    """
    n = len(scenarios)
    if n == 0:
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        return BatchResult(zi, z, z, z, z, zi, zi, zi, z, z)
    dt = scenarios[0].dt
    horizon = scenarios[0].horizon
    for sc in scenarios:
        if sc.dt != dt or sc.horizon != horizon:
            raise ValueError("batch scenarios must share dt and horizon")
        if not kernel_eligible(sc):
            raise ValueError("scenario not eligible for the batch kernel")
    n_steps = max(1, int(round(horizon / dt)))

    f = lambda: np.zeros(n)
    a_max, a_min, a_acc = f(), f(), f()
    j, ceil_a, look = f(), f(), f()
    gap0, vr0, ar0, vf0, af0 = f(), f(), f(), f(), f()
    drv_code = np.zeros(n, dtype=np.int64)
    drv_p1, drv_p2 = f(), f()
    ctrl_code = np.zeros(n, dtype=np.int64)
    ttc_thr, brake_mag, p_fail = f(), f(), f()
    kseed = np.zeros(n, dtype=np.int64)
    script_off = np.zeros(n + 1, dtype=np.int64)
    t_chunks, a_chunks = [], []

    for i, sc in enumerate(scenarios):
        p = sc.params
        a_max[i], a_min[i], a_acc[i] = p.a_max_brake, p.a_min_brake, p.a_max_accel
        j[i], ceil_a[i] = p.j_max, p.ceiling
        gap0[i] = sc.initial.gap
        vr0[i], ar0[i] = sc.initial.rear.v, sc.initial.rear.a
        vf0[i], af0[i] = sc.initial.front.v, sc.initial.front.a
        script = resolve_front_script(sc)
        t_chunks.append(np.array([s[0] for s in script]))
        a_chunks.append(np.array([s[1] for s in script]))
        script_off[i + 1] = script_off[i] + len(script)
        d = sc.driver
        drv_code[i] = _DRIVER_CODE[type(d)]
        if isinstance(d, Tailgater):
            drv_p1[i], drv_p2[i] = d.target_gap, d.gain
        elif isinstance(d, DistractedFollower):
            drv_p1[i], drv_p2[i] = d.reaction_delay, d.comfort_decel
        c = sc.controller
        if isinstance(c, ApbControl):
            ctrl_code[i] = engine.CTRL_APB
            look[i] = max(c.latency, dt)
            p_fail[i] = sc.p_fail
        elif isinstance(c, AebControl):
            ctrl_code[i] = engine.CTRL_AEB
            ttc_thr[i] = c.config.ttc_threshold
            brake_mag[i] = c.config.brake_magnitude
        kseed[i] = _kernel_seed(sc.seed)

    script_t = np.concatenate(t_chunks) if t_chunks else np.zeros(0)
    script_a = np.concatenate(a_chunks) if a_chunks else np.zeros(0)
    sufmax = np.full(len(script_a) + 1, -np.inf)
    for i in range(n - 1, -1, -1):
        lo_i, hi_i = script_off[i], script_off[i + 1]
        run_max = -np.inf
        for k in range(hi_i - 1, lo_i - 1, -1):
            run_max = max(run_max, script_a[k])
            sufmax[k] = run_max

    out = BatchResult(
        status=np.zeros(n, dtype=np.int64), min_gap=np.zeros(n), coll_t=np.zeros(n),
        end_t=np.zeros(n), final_gap=np.zeros(n),
        n_eps=np.zeros(n, dtype=np.int64), n_int=np.zeros(n, dtype=np.int64),
        n_sup=np.zeros(n, dtype=np.int64), max_dec=np.zeros(n), max_jerk_step=np.zeros(n),
    )
    engine.run_batch(
        dt, n_steps,
        a_max, a_min, a_acc, j, ceil_a, look,
        gap0, vr0, ar0, vf0, af0,
        script_off, script_t, script_a, sufmax,
        drv_code, drv_p1, drv_p2,
        ctrl_code, ttc_thr, brake_mag, p_fail, kseed,
        out.status, out.min_gap, out.coll_t, out.end_t, out.final_gap,
        out.n_eps, out.n_int, out.n_sup, out.max_dec, out.max_jerk_step,
    )
    return out


# --- the no-collision verifier ---------------------------------------------

@dataclass
class VerificationReport:
    n: int
    n_collisions: int
    collision_indices: np.ndarray
    min_gaps: np.ndarray
    min_gap_overall: float
    passed: bool
    counterexample: Trace | None = None

    def histogram(self, bins: int = 30):
        return np.histogram(self.min_gaps, bins=bins)


def _verify_scenario(p: RssParams, seed_child, dt: float, horizon: float) -> Scenario:
    rng = np.random.default_rng(seed_child)
    v_r = rng.uniform(0.0, 40.0)
    v_f = rng.uniform(0.0, 40.0)
    d_safe = engine.apb_safe_distance(v_r, 0.0, v_f, p.j_max, p.a_min_brake, p.a_max_brake)
    gap = d_safe + rng.uniform(0.0, 50.0)
    script_seed = int(rng.integers(0, 2 ** 31 - 1))
    sim_seed = int(rng.integers(0, 2 ** 31 - 1))
    return Scenario(
        params=p,
        initial=SceneState(KinematicState(0.0, v_r, 0.0),
                           KinematicState(gap, v_f, 0.0), gap),
        adversarial=AdversarialSpec(seed=script_seed, compliant=True),
        driver=Tailgater(),
        controller=ApbControl(),
        p_fail=0.0,
        dt=dt,
        horizon=horizon,
        seed=sim_seed,
    )


def verify_no_collision(n: int, seed: int, p: RssParams,
                        dt: float = 0.01, horizon: float = 12.0) -> VerificationReport:
    """Empirically check the no-collision guarantee on random scenarios.

    Each scenario draws initial speeds in [0, 40] m/s, an initial gap of
    the safe distance plus up to 50 m of surplus, a compliant adversarial
    front script, a tailgating driver, and APB with no failure injection.
    The guarantee holds iff no scenario ever registers a collision.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n)
    scenarios = [_verify_scenario(p, ch, dt, horizon) for ch in children]
    res = run_batch(scenarios)
    coll = np.flatnonzero(res.status == engine.STATUS_COLLISION)
    counterexample = None
    if len(coll):
        counterexample = run(scenarios[int(coll[0])])
    return VerificationReport(
        n=n,
        n_collisions=int(len(coll)),
        collision_indices=coll,
        min_gaps=res.min_gap,
        min_gap_overall=float(res.min_gap.min()) if n else math.inf,
        passed=len(coll) == 0,
        counterexample=counterexample,
    )


# --- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    arm: str
    n_scenarios: int
    n_dangerous_episodes: int
    n_collisions: int
    n_interventions: int
    n_suppressed: int
    max_commanded_jerk: float  # m/s^3, largest step-to-step command change
    max_commanded_decel: float
    elimination_rate: float | None = None
    baseline_arm: str | None = None


_ARM_CONTROLLERS = {
    "none": NoControl(),
    "apb": ApbControl(),
    "aeb": AebControl(),
}


def _apply_population(sc: Scenario, rng: np.random.Generator) -> Scenario:
    pop = sc.population
    if pop is None:
        return sc
    v_r = sc.initial.rear.v
    v_f = sc.initial.front.v
    if pop.v_rear is not None:
        v_r = rng.uniform(*pop.v_rear)
    if pop.match_front_to_rear:
        v_f = v_r
    elif pop.v_front is not None:
        v_f = rng.uniform(*pop.v_front)
    gap = sc.initial.gap
    if pop.gap is not None:
        gap = rng.uniform(*pop.gap)
    elif pop.gap_safe_plus is not None:
        d = engine.apb_safe_distance(v_r, 0.0, v_f, sc.params.j_max,
                                     sc.params.a_min_brake, sc.params.a_max_brake)
        gap = d + rng.uniform(*pop.gap_safe_plus)
    initial = SceneState(KinematicState(0.0, v_r, sc.initial.rear.a),
                         KinematicState(gap, v_f, sc.initial.front.a), gap)
    sc = replace(sc, initial=initial, population=None)
    if pop.brake_t is not None:
        t0 = rng.uniform(*pop.brake_t)
        decel = rng.uniform(*pop.brake_decel) if pop.brake_decel else sc.params.a_max_brake
        dur = rng.uniform(*pop.brake_duration) if pop.brake_duration else math.inf
        script = [(0.0, 0.0), (t0, -decel)]
        if math.isfinite(dur):
            script.append((t0 + dur, 0.0))
        sc = replace(sc, front_script=tuple(script), adversarial=None)
    return sc


def _expand_axes(base: Scenario, axes: dict[str, list] | None) -> list[Scenario]:
    """Cross product of dotted-path parameter overrides."""
    from .scenario_io import parse_scenario, serialize_scenario

    if not axes:
        return [base]
    docs = [serialize_scenario(base)]
    for path, values in axes.items():
        new_docs = []
        keys = path.split(".")
        for doc in docs:
            for val in values:
                d2 = json.loads(json.dumps(doc))
                node = d2
                for key in keys[:-1]:
                    node = node.setdefault(key, {})
                node[keys[-1]] = val
                new_docs.append(d2)
        docs = new_docs
    return [parse_scenario(doc) for doc in docs]


def sweep(
    base: Scenario,
    n: int,
    seed: int,
    paired_controllers: tuple[str, ...] = ("none", "apb"),
    p_fail: float | None = None,
    axes: dict[str, list] | None = None,
    max_runs: int = 2_000_000,
) -> dict[str, SweepResult]:
    """Paired Monte Carlo / grid sweep over scenario variations.

    Every arm sees the exact same scenario draws (initial conditions and
    front scripts derive from per-index seeds shared across arms); only
    the controller differs. The elimination rate of each non-baseline arm
    is reported against the first arm whenever that baseline produced at
    least one collision.
    """
    grid = _expand_axes(base, axes)
    total = len(grid) * max(n, 0) * len(paired_controllers)
    if total > max_runs:
        raise ValueError(f"sweep would run {total} scenarios, above the cap {max_runs}")

    children = np.random.SeedSequence(seed).spawn(max(n, 0))
    variants: list[Scenario] = []
    for g_idx, g in enumerate(grid):
        for i, ch in enumerate(children):
            rng = np.random.default_rng(ch)
            sc = _apply_population(g, rng)
            script_seed = int(rng.integers(0, 2 ** 31 - 1))
            sim_seed = int(rng.integers(0, 2 ** 31 - 1))
            if sc.adversarial is not None:
                sc = replace(sc, adversarial=AdversarialSpec(script_seed, sc.adversarial.compliant))
            sc = replace(sc, seed=sim_seed)
            variants.append(sc)

    results: dict[str, SweepResult] = {}
    baseline_collisions = None
    for arm in paired_controllers:
        if arm not in _ARM_CONTROLLERS:
            raise ValueError(f"unknown controller arm {arm!r}")
        arm_pfail = 0.0 if arm == "none" else (p_fail if p_fail is not None else base.p_fail)
        arm_scenarios = [replace(sc, controller=_ARM_CONTROLLERS[arm], p_fail=arm_pfail)
                         for sc in variants]
        agg = _run_arm(arm_scenarios)
        n_coll, n_eps, n_int, n_sup, max_dec, max_jerk = agg
        elim = None
        base_arm = None
        if baseline_collisions is None:
            baseline_collisions = n_coll
        elif baseline_collisions > 0:
            elim = 1.0 - n_coll / baseline_collisions
            base_arm = paired_controllers[0]
        results[arm] = SweepResult(
            arm=arm,
            n_scenarios=len(arm_scenarios),
            n_dangerous_episodes=n_eps,
            n_collisions=n_coll,
            n_interventions=n_int,
            n_suppressed=n_sup,
            max_commanded_jerk=max_jerk,
            max_commanded_decel=max_dec,
            elimination_rate=elim,
            baseline_arm=base_arm,
        )
    return results


def _run_arm(scenarios: list[Scenario]) -> tuple[int, int, int, int, float, float]:
    if not scenarios:
        return (0, 0, 0, 0, 0.0, 0.0)
    if all(kernel_eligible(sc) for sc in scenarios):
        res = run_batch(scenarios)
        dt = scenarios[0].dt
        return (
            int((res.status == engine.STATUS_COLLISION).sum()),
            int(res.n_eps.sum()),
            int(res.n_int.sum()),
            int(res.n_sup.sum()),
            float(res.max_dec.max()),
            float(res.max_jerk_step.max()) / dt,
        )
    n_coll = n_eps = n_int = n_sup = 0
    max_dec = 0.0
    max_jerk = 0.0
    for sc in scenarios:
        tr = run(sc)
        n_coll += int(tr.collided)
        n_sup += tr.n_suppressed
        n_eps += sum(1 for e in tr.events if e.kind == "danger_onset")
        n_int += sum(1 for e in tr.events if e.kind == "intervention_start")
        active = tr.mode == 1
        if active.any():
            cmds = tr.cmd_accel
            max_dec = max(max_dec, float((-cmds[active]).max()))
            steps_in = active[1:]  # entry step included, release step not
            if steps_in.any():
                max_jerk = max(max_jerk,
                               float(np.abs(cmds[1:][steps_in] - cmds[:-1][steps_in]).max())
                               / sc.dt)
    return (n_coll, n_eps, n_int, n_sup, max_dec, max_jerk)
