"""Closed-form kinematics of the three braking profiles.

A braking profile maps an initial kinematic state to a future velocity
function v(t) and the first time T_b at which the car is (permanently)
stopped. Three profiles are implemented:

* ``FRONT_MAX_BRAKE`` — constant deceleration at ``a_max_brake``:
  v(t) = max(v0 - t * a_max_brake, 0).
* ``RSS_REAR`` — the classic worst-case rear response: accelerate at
  ``a_max_accel`` for the response time ``rho``, then brake at
  ``a_min_brake`` to a stop.
* ``JERK_BOUNDED`` — ramp the acceleration down at slope ``j_max`` until
  it reaches ``-a_min_brake`` (or the car stops first), then hold that
  deceleration to a stop.

Every profile velocity is a continuous piecewise polynomial of degree
at most two, which the safety module exploits to compute safe distances
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .params import KinematicState, RssParams

# Tolerance for "already past the velocity zero" checks in the raw
# constant-jerk formulas.
_T_EPS = 1e-12


class ProfileId(Enum):
    FRONT_MAX_BRAKE = "front_max_brake"
    RSS_REAR = "rss_rear"
    JERK_BOUNDED = "jerk_bounded"


@dataclass(frozen=True)
class BrakeSchedule:
    """Phase boundaries of a jerk-bounded braking maneuver.

    Attributes:
        t1: time for the jerk ramp to reach -a_min_brake (s).
        t2: time at which the velocity would hit zero within the jerk
            phase (s).
        t_switch: T = min(t1, t2), end of the jerk phase (s).
        t_stop: T_b, first time the velocity is (permanently) zero (s).
        v_at_switch: velocity at t_switch (m/s).
        d_jerk: distance covered during [0, t_switch] (m).
        d_total: total braking distance until full stop (m).
    """

    t1: float
    t2: float
    t_switch: float
    t_stop: float
    v_at_switch: float
    d_jerk: float
    d_total: float


def _clamp_initial_accel(a0: float, a_min_brake: float) -> float:
    # Positive acceleration is shed instantly at braking onset (throttle
    # release is treated as immediate); deceleration already at or beyond
    # the target level starts the profile directly in the constant phase.
    return min(0.0, max(a0, -a_min_brake))


def jerk_phase_state(s0: KinematicState, j_max: float, t: float) -> KinematicState:
    """State after braking with constant jerk for a duration ``t``.

    The raw constant-jerk dynamics are
        a(t) = a0 - j_max * t
        v(t) = v0 + a0 * t - j_max * t^2 / 2
        x(t) = x0 + v0 * t + a0 * t^2 / 2 - j_max * t^3 / 6
    valid only while v(t) >= 0; ``t`` past the zero crossing of the
    velocity is rejected because the polynomial would drive v negative.

    Raises:
        ValueError: if t < 0, s0.a > 0 (clamp it first), or t lies beyond
            the velocity zero crossing.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if j_max <= 0.0:
        raise ValueError("j_max must be > 0")
    if s0.a > 0.0:
        raise ValueError("initial acceleration must be <= 0 (clamp before the ramp)")
    t2 = (s0.a + math.sqrt(s0.a * s0.a + 2.0 * j_max * s0.v)) / j_max
    if t > t2 + _T_EPS:
        raise ValueError(
            f"t={t} is beyond the velocity zero crossing t2={t2}; "
            "the raw jerk-phase formula does not apply there"
        )
    x = s0.x + s0.v * t + 0.5 * s0.a * t * t - j_max * t ** 3 / 6.0
    v = max(0.0, s0.v + s0.a * t - 0.5 * j_max * t * t)
    a = s0.a - j_max * t
    return KinematicState(x, v, a)


def brake_schedule_jerk(s0: KinematicState, p: RssParams) -> BrakeSchedule:
    """Phase boundaries and distances of the jerk-bounded profile.

    The jerk phase ends at T = min(t1, t2) where t1 is the time to reach
    full deceleration and t2 the time the velocity would reach zero while
    still ramping. A tie is treated as the t2 branch (both agree there).
    The stop time adds the constant-deceleration phase: T_b = T + v(T) /
    a_min_brake when the ramp ends first.
    """
    a0 = _clamp_initial_accel(s0.a, p.a_min_brake)
    v0 = s0.v
    j = p.j_max
    t1 = (a0 + p.a_min_brake) / j
    t2 = (a0 + math.sqrt(a0 * a0 + 2.0 * j * v0)) / j
    if t2 <= t1:
        t_switch = t2
        v_at_switch = max(0.0, v0 + a0 * t2 - 0.5 * j * t2 * t2)
        t_stop = t2
    else:
        t_switch = t1
        v_at_switch = max(0.0, v0 + a0 * t1 - 0.5 * j * t1 * t1)
        t_stop = t1 + v_at_switch / p.a_min_brake
    d_jerk = v0 * t_switch + 0.5 * a0 * t_switch ** 2 - j * t_switch ** 3 / 6.0
    d_total = d_jerk + v_at_switch ** 2 / (2.0 * p.a_min_brake)
    return BrakeSchedule(t1, t2, t_switch, t_stop, v_at_switch, d_jerk, d_total)


# A velocity segment (t_start, t_end, c0, c1, c2) describes
# v(t) = c0 + c1*(t - t_start) + c2*(t - t_start)^2 on [t_start, t_end];
# the velocity is identically zero after the last segment.
Segment = tuple[float, float, float, float, float]


def velocity_segments(profile: ProfileId, s0: KinematicState, p: RssParams) -> list[Segment]:
    """Piecewise-polynomial representation of a profile's velocity."""
    segs: list[Segment] = []
    if profile is ProfileId.FRONT_MAX_BRAKE:
        if s0.v > 0.0:
            segs.append((0.0, s0.v / p.a_max_brake, s0.v, -p.a_max_brake, 0.0))
    elif profile is ProfileId.RSS_REAR:
        v_peak = s0.v + p.rho * p.a_max_accel
        t_stop = p.rho + v_peak / p.a_min_brake
        if p.rho > 0.0:
            segs.append((0.0, p.rho, s0.v, p.a_max_accel, 0.0))
        if t_stop > p.rho:
            segs.append((p.rho, t_stop, v_peak, -p.a_min_brake, 0.0))
    elif profile is ProfileId.JERK_BOUNDED:
        sched = brake_schedule_jerk(s0, p)
        a0 = _clamp_initial_accel(s0.a, p.a_min_brake)
        if sched.t_switch > 0.0:
            segs.append((0.0, sched.t_switch, s0.v, a0, -0.5 * p.j_max))
        if sched.t_stop > sched.t_switch:
            segs.append((sched.t_switch, sched.t_stop, sched.v_at_switch, -p.a_min_brake, 0.0))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return segs


def stop_time(profile: ProfileId, s0: KinematicState, p: RssParams) -> float:
    """First time at which the profile's velocity is permanently zero."""
    segs = velocity_segments(profile, s0, p)
    return segs[-1][1] if segs else 0.0


def velocity_at(profile: ProfileId, s0: KinematicState, p: RssParams, t):
    """Profile velocity at time(s) ``t`` (scalar or ndarray), zero after stop."""
    segs = velocity_segments(profile, s0, p)
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0):
        raise ValueError("t must be >= 0")
    v = np.zeros_like(t_arr)
    for (ta, tb, c0, c1, c2) in segs:
        m = (t_arr >= ta) & (t_arr < tb)
        tau = t_arr[m] - ta
        v[m] = c0 + c1 * tau + c2 * tau * tau
    v = np.maximum(v, 0.0)
    return float(v[0]) if scalar else v


def distance_traveled(profile: ProfileId, s0: KinematicState, p: RssParams, t):
    """Distance covered by the profile up to time(s) ``t``.

    Equals the integral of the profile velocity; non-decreasing in t and
    constant once the car has stopped (pass ``math.inf`` for the total).
    """
    segs = velocity_segments(profile, s0, p)
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0):
        raise ValueError("t must be >= 0")
    d = np.zeros_like(t_arr)
    cum = 0.0
    for (ta, tb, c0, c1, c2) in segs:
        full = tb - ta
        m = (t_arr >= ta) & (t_arr < tb)
        tau = t_arr[m] - ta
        d[m] = cum + c0 * tau + c1 * tau ** 2 / 2.0 + c2 * tau ** 3 / 3.0
        cum += c0 * full + c1 * full ** 2 / 2.0 + c2 * full ** 3 / 3.0
        d[t_arr >= tb] = cum
    return float(d[0]) if scalar else d


def segment_distance_at(segs: list[Segment], t: float) -> float:
    """Distance covered up to scalar time ``t`` for a prebuilt segment list."""
    d = 0.0
    for (ta, tb, c0, c1, c2) in segs:
        if t <= ta:
            break
        tau = min(t, tb) - ta
        d += c0 * tau + c1 * tau ** 2 / 2.0 + c2 * tau ** 3 / 3.0
    return d


def segment_velocity_at(segs: list[Segment], t: float) -> float:
    """Velocity at scalar time ``t`` for a prebuilt segment list."""
    for (ta, tb, c0, c1, c2) in segs:
        if ta <= t < tb:
            tau = t - ta
            return max(0.0, c0 + c1 * tau + c2 * tau * tau)
    return 0.0
