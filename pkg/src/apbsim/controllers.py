"""Intervention controllers, driver policies, and failure injection.

Two interventions are provided:

* ``apb_step`` — preventive braking: the moment the monitored gap stops
  being safe, command a brake ramp with bounded jerk down to
  ``-a_min_brake``, releasing on standstill, restored safety, or driver
  override.
* ``aeb_step`` — the emergency baseline: a hard constant brake applied
  as a step the instant the time-to-collision drops to a small
  threshold.

All step functions are deterministic transitions on explicit state
values; simulations never share mutable controller state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

import numpy as np

from .params import PHYSICAL_ACCEL_CEILING, RssParams, KinematicState
from .safety import SceneState, safe_distance_apb

_STANDSTILL_V = 1e-12
_BRAKING_A = -1e-9  # accelerations below this count as braking


class Mode(Enum):
    MONITORING = 0
    INTERVENING = 1
    OVERRIDDEN = 2


@dataclass(frozen=True)
class ControllerState:
    """APB mode plus intervention bookkeeping.

    ``onset_time``, ``a_onset`` and ``commanded_accel`` are populated only
    while intervening; in the other modes the driver command passes
    through untouched.
    """

    mode: Mode = Mode.MONITORING
    onset_time: float | None = None
    a_onset: float | None = None
    commanded_accel: float | None = None


@dataclass(frozen=True)
class AebConfig:
    ttc_threshold: float = 2.0
    brake_magnitude: float = 14.7  # ~1.5 g

    def __post_init__(self):
        if self.ttc_threshold <= 0.0:
            raise ValueError("ttc_threshold must be > 0")
        if not 0.0 < self.brake_magnitude <= PHYSICAL_ACCEL_CEILING:
            raise ValueError("brake_magnitude must be in (0, ceiling]")


@dataclass(frozen=True)
class AebState:
    latched: bool = False


# --- driver policies ---------------------------------------------------

@dataclass(frozen=True)
class ConstantSpeed:
    """Holds the current speed (zero commanded acceleration)."""


@dataclass(frozen=True)
class Tailgater:
    """Proportional controller closing on a short target gap."""

    target_gap: float = 2.0
    gain: float = 0.5  # 1/s^2


@dataclass(frozen=True)
class DistractedFollower:
    """Reacts to the front car's braking only after a fixed delay."""

    reaction_delay: float = 1.5
    comfort_decel: float = 3.0


DriverPolicy = Union[ConstantSpeed, Tailgater, DistractedFollower]


@dataclass
class DriverMemory:
    """Per-run bookkeeping for policies that need history (owned by the sim)."""

    front_braking_since: float | None = None
    reacting: bool = False


def ttc(gap: float, v_r: float, v_f: float) -> float:
    """Time-to-collision: gap over closing speed; infinite when not closing.

    Raises:
        ValueError: if gap <= 0 (the cars already touch).
    """
    if gap <= 0.0:
        raise ValueError("ttc requires a positive gap")
    closing = v_r - v_f
    if closing <= 0.0:
        return math.inf
    return gap / closing


def aeb_step(
    state: AebState, scene: SceneState, cfg: AebConfig, driver_accel: float
) -> tuple[AebState, float]:
    """One AEB decision: full step brake below the TTC threshold, else pass through.

    Once triggered the brake latches until the scene stops closing
    (v_r <= v_f) or the car stands still; a non-positive observed gap
    counts as an immediate trigger.
    """
    latched = state.latched
    if latched and (scene.rear.v <= scene.front.v or scene.rear.v <= _STANDSTILL_V):
        latched = False
    if not latched:
        if scene.gap <= 0.0:
            latched = True
        elif ttc(scene.gap, scene.rear.v, scene.front.v) <= cfg.ttc_threshold:
            latched = True
    if latched:
        return AebState(latched=True), -cfg.brake_magnitude
    return AebState(latched=False), driver_accel


def apb_monitor_margin(
    scene: SceneState, p: RssParams, rear_cmd: float, lookahead: float
) -> float:
    """Safety margin of the scene extrapolated one monitoring period ahead.

    The extrapolation is worst-case on the front (braking at
    ``a_max_brake``) and exact on the rear, which will hold ``rear_cmd``
    for the coming period. With ``lookahead`` equal to the decision
    interval, a non-negative margin at one decision instant guarantees a
    non-negative *actual* margin at the next, which is what makes the
    intervention start early enough for the no-collision argument to go
    through under sampled monitoring.
    """
    gap, v_r, v_f = scene.gap, scene.rear.v, scene.front.v
    if lookahead > 0.0:
        tf = min(lookahead, v_f / p.a_max_brake)
        d_f = v_f * tf - 0.5 * p.a_max_brake * tf * tf
        v_f = max(0.0, v_f - p.a_max_brake * tf)
        if rear_cmd < 0.0:
            tr = min(lookahead, v_r / -rear_cmd)
        else:
            tr = lookahead
        d_r = v_r * tr + 0.5 * rear_cmd * tr * tr
        v_r = max(0.0, v_r + rear_cmd * tr)
        gap = gap - (d_r - d_f)
    a0 = min(rear_cmd, 0.0)
    d_safe = safe_distance_apb(KinematicState(0.0, v_r, a0), v_f, p)
    return gap - d_safe


def apb_ramp_command(state: ControllerState, p: RssParams, now: float) -> float:
    """The jerk-ramped brake command at time ``now`` of an active intervention."""
    assert state.mode is Mode.INTERVENING and state.onset_time is not None
    return max(state.a_onset - p.j_max * (now - state.onset_time), -p.a_min_brake)


def apb_step(
    state: ControllerState,
    scene: SceneState,
    p: RssParams,
    driver_accel: float,
    now: float,
    override: bool = False,
    lookahead: float = 0.0,
) -> tuple[ControllerState, float]:
    """One APB decision instant.

    Monitoring -> Intervening when the (lookahead-extrapolated) scene is
    dangerous; while intervening the command is the jerk ramp, floored at
    the driver's own command so a harder-braking driver is never
    overridden upward. The intervention ends on rear standstill or once
    the scene is safe again; ``override=True`` hands control back to the
    driver until cleared.
    """
    if override:
        return ControllerState(mode=Mode.OVERRIDDEN), driver_accel

    mode = state.mode
    if mode is Mode.OVERRIDDEN:
        mode = Mode.MONITORING

    margin = apb_monitor_margin(scene, p, driver_accel, lookahead)
    dangerous = margin < 0.0

    # Release requires the danger bout to be resolved, not merely grazed:
    # safe again AND no longer closing (else one accelerating driver step
    # would re-trigger immediately, splitting one dangerous situation into
    # a chatter of one-step episodes), or a standstill.
    resolved = not dangerous and scene.rear.v <= scene.front.v
    if mode is Mode.INTERVENING and (scene.rear.v <= _STANDSTILL_V or resolved):
        mode = Mode.MONITORING
    if mode is Mode.MONITORING and dangerous:
        # Entering at standstill immediately re-triggers the standstill
        # exit next step; the net effect is that the car is pinned with a
        # non-positive command until the scene is safe again.
        a_onset = min(driver_accel, 0.0)
        state = ControllerState(Mode.INTERVENING, onset_time=now, a_onset=a_onset)
        cmd = min(apb_ramp_command(state, p, now), driver_accel)
        return replace(state, commanded_accel=cmd), cmd

    if mode is Mode.INTERVENING:
        cmd = min(apb_ramp_command(state, p, now), driver_accel)
        return replace(state, commanded_accel=cmd), cmd
    return ControllerState(mode=Mode.MONITORING), driver_accel


def driver_step(
    policy: DriverPolicy,
    scene: SceneState,
    now: float,
    memory: DriverMemory | None = None,
) -> float:
    """Desired signed acceleration of the human driver.

    ``memory`` carries the bookkeeping the distracted follower needs
    (when the front started braking); stateless policies ignore it.
    """
    if isinstance(policy, ConstantSpeed):
        return 0.0
    if isinstance(policy, Tailgater):
        cmd = policy.gain * (scene.gap - policy.target_gap)
        return float(np.clip(cmd, -PHYSICAL_ACCEL_CEILING, PHYSICAL_ACCEL_CEILING))
    if isinstance(policy, DistractedFollower):
        if memory is None:
            memory = DriverMemory()
        front_braking = scene.front.a < _BRAKING_A
        if front_braking:
            if memory.front_braking_since is None:
                memory.front_braking_since = now
        else:
            memory.front_braking_since = None
        if memory.reacting:
            if scene.rear.v <= scene.front.v:
                memory.reacting = False  # no longer closing; release
        elif (
            memory.front_braking_since is not None
            and now - memory.front_braking_since >= policy.reaction_delay
        ):
            memory.reacting = True
        return -policy.comfort_decel if memory.reacting else 0.0
    raise TypeError(f"unknown driver policy {policy!r}")


# --- failure injection ---------------------------------------------------

class ApbController:
    """Stateful wrapper over ``apb_step`` with a uniform step interface."""

    def __init__(self, p: RssParams, lookahead: float = 0.0):
        self.p = p
        self.lookahead = lookahead
        self.state = ControllerState()

    @property
    def intervening(self) -> bool:
        return self.state.mode is Mode.INTERVENING

    def reset_to_monitoring(self):
        self.state = ControllerState()

    def step(self, scene: SceneState, driver_accel: float, now: float,
             override: bool = False) -> float:
        self.state, cmd = apb_step(
            self.state, scene, self.p, driver_accel, now, override, self.lookahead
        )
        return cmd


class AebController:
    """Stateful wrapper over ``aeb_step``."""

    def __init__(self, cfg: AebConfig):
        self.cfg = cfg
        self.state = AebState()

    @property
    def intervening(self) -> bool:
        return self.state.latched

    def reset_to_monitoring(self):
        self.state = AebState()

    def step(self, scene: SceneState, driver_accel: float, now: float,
             override: bool = False) -> float:
        if override:
            self.state = AebState()
            return driver_accel
        self.state, cmd = aeb_step(self.state, scene, self.cfg, driver_accel)
        return cmd


class PassthroughController:
    """No intervention; the driver command always passes through."""

    intervening = False

    def reset_to_monitoring(self):
        pass

    def step(self, scene: SceneState, driver_accel: float, now: float,
             override: bool = False) -> float:
        return driver_accel


# Intervention attempts separated by less than this long of resolved,
# intervention-free driving belong to the same dangerous situation and
# share one failure draw; a fresh draw requires the scene to have stayed
# resolved at least this long.
EPISODE_REFRACTORY = 2.0


class FailureWrapper:
    """Suppresses whole dangerous-situation episodes with probability ``p_fail``.

    One Bernoulli draw is made per dangerous situation, at the instant
    the wrapped controller first tries to intervene for it. Intervention
    attempts within ``refractory`` seconds of the last controller
    activity continue the same situation (boundary-riding drivers
    re-trigger the monitor within fractions of a second; those retries
    are not new situations) and reuse its draw. On a failed draw every
    attempt belonging to the situation is suppressed. Deterministic
    given the seed.
    """

    def __init__(self, inner, p_fail: float, rng_seed: int,
                 refractory: float = EPISODE_REFRACTORY):
        if not 0.0 <= p_fail <= 1.0:
            raise ValueError("p_fail must be a probability")
        self.inner = inner
        self.p_fail = p_fail
        self.refractory = refractory
        self.rng = np.random.default_rng(rng_seed)
        self.n_suppressed = 0
        self._outcome_failed: bool | None = None
        self._last_active_t: float | None = None

    @property
    def intervening(self) -> bool:
        return self.inner.intervening

    def reset_to_monitoring(self):
        self.inner.reset_to_monitoring()
        self._outcome_failed = None
        self._last_active_t = None

    def step(self, scene: SceneState, driver_accel: float, now: float,
             override: bool = False) -> float:
        was_intervening = self.inner.intervening
        cmd = self.inner.step(scene, driver_accel, now, override)
        started = self.inner.intervening and not was_intervening
        if started:
            stale = (self._last_active_t is None
                     or now - self._last_active_t >= self.refractory)
            if self._outcome_failed is None or stale:
                self._outcome_failed = (self.p_fail > 0.0
                                        and self.rng.random() < self.p_fail)
                if self._outcome_failed:
                    self.n_suppressed += 1
            if self._outcome_failed:
                self.inner.reset_to_monitoring()
                self._last_active_t = now
                return driver_accel
        if self.inner.intervening:
            self._last_active_t = now
        return cmd


def with_failure(controller, p_fail: float, rng_seed: int,
                 refractory: float = EPISODE_REFRACTORY) -> FailureWrapper:
    """Wrap a controller so interventions fail per dangerous situation."""
    return FailureWrapper(controller, p_fail, rng_seed, refractory)
