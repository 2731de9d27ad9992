"""Safe-distance computations, danger classification, and compliance checks.

A longitudinal gap is *safe* w.r.t. a pair of braking profiles (front
profile B_f, rear profile B_r) if, were both cars to follow their
profiles from now on, they would reach a full stop without touching.
The minimal such gap equals

    d_safe = sup_{t >= 0} [ dist_r(t) - dist_f(t) ]  clamped at 0,

where dist_* are the distances traveled under the profiles. Because the
profile velocities are piecewise polynomials of degree <= 2, the sup is
attained either at a segment breakpoint or at a root of
v_r(t) = v_f(t) inside a segment, so it can be computed exactly from a
finite candidate set — no time discretization is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .params import KinematicState, RssParams
from .profiles import (
    ProfileId,
    Segment,
    brake_schedule_jerk,
    segment_distance_at,
    segment_velocity_at,
    velocity_segments,
)

# Agreement tolerance between the generalized computation and the
# closed-form expression in its validity regime (full stop dominates).
_CLOSED_FORM_TOL = 1e-9


@dataclass(frozen=True)
class SceneState:
    """Two-car scene: rear follower, front leader, and their bumper gap.

    ``gap`` is the distance from the rear car's front bumper to the front
    car's rear bumper (car lengths already subtracted); gap <= 0 means
    the cars touch or overlap.
    """

    rear: KinematicState
    front: KinematicState
    gap: float


@dataclass(frozen=True)
class SafetyVerdict:
    dangerous: bool
    d_safe: float
    margin: float  # gap - d_safe; dangerous iff margin < 0


@dataclass(frozen=True)
class ResponseEnvelope:
    """Velocity envelopes both cars must respect from danger onset ``t0``.

    ``front_min_velocity`` and ``rear_max_velocity`` map time since t0 to
    a speed; they are the profile velocity functions frozen at the states
    observed at t0. The front must stay at or above its curve, the rear
    at or below its own.
    """

    t0: float
    front_min_velocity: Callable[[float], float]
    rear_max_velocity: Callable[[float], float]


def _quad_roots(c2: float, c1: float, c0: float, lo: float, hi: float) -> list[float]:
    """Real roots of c2*x^2 + c1*x + c0 in the open interval (lo, hi)."""
    roots = []
    if abs(c2) < 1e-14:
        if abs(c1) > 1e-14:
            roots.append(-c0 / c1)
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc >= 0.0:
            s = math.sqrt(disc)
            roots.extend(((-c1 - s) / (2.0 * c2), (-c1 + s) / (2.0 * c2)))
    return [r for r in roots if lo < r < hi]


def _seg_poly_at(segs: list[Segment], t: float) -> tuple[float, float, float]:
    """Coefficients (c0, c1, c2) of v(t + x) near ``t`` for small x >= 0."""
    for (ta, tb, c0, c1, c2) in segs:
        if ta <= t < tb:
            tau = t - ta
            return (c0 + c1 * tau + c2 * tau * tau, c1 + 2.0 * c2 * tau, c2)
    return (0.0, 0.0, 0.0)


def _sup_relative_displacement(segs_r: list[Segment], segs_f: list[Segment]) -> float:
    """Exact sup over t >= 0 of dist_r(t) - dist_f(t) (>= 0, attained at t=0 if nowhere else)."""
    breaks = {0.0}
    t_max = 0.0
    for segs in (segs_r, segs_f):
        for (ta, tb, _, _, _) in segs:
            breaks.update((ta, tb))
            t_max = max(t_max, tb)
    breaks.add(t_max)
    pts = sorted(b for b in breaks if 0.0 <= b <= t_max)

    candidates = list(pts)
    for u, w in zip(pts, pts[1:]):
        if w - u <= 1e-15:
            continue
        r0, r1, r2 = _seg_poly_at(segs_r, u)
        f0, f1, f2 = _seg_poly_at(segs_f, u)
        # roots of v_r - v_f within (u, w): relative displacement extrema
        for x in _quad_roots(r2 - f2, r1 - f1, r0 - f0, 0.0, w - u):
            candidates.append(u + x)

    best = 0.0
    for t in candidates:
        d = segment_distance_at(segs_r, t) - segment_distance_at(segs_f, t)
        if d > best:
            best = d
    return best


def safe_distance_generalized(
    rear0: KinematicState,
    front0: KinematicState,
    bf: ProfileId,
    br: ProfileId,
    p: RssParams,
) -> float:
    """Minimal safe gap for the profile pair (front ``bf``, rear ``br``).

    An initial gap strictly greater than the returned value guarantees
    the cars never touch while both follow their profiles. The value is
    the exact sup of the relative displacement, which may be attained at
    an interior crossing of the two velocity curves rather than at the
    full-stop point (e.g. when the rear profile out-brakes the front's).
    """
    segs_r = velocity_segments(br, rear0, p)
    segs_f = velocity_segments(bf, front0, p)
    return _sup_relative_displacement(segs_r, segs_f)


def safe_distance_rss(v_r: float, v_f: float, p: RssParams) -> float:
    """Classic safe distance: front at max brake vs. the worst-case rear response.

    Matches the familiar closed form
        [v_r*rho + a_max_accel*rho^2/2
         + (v_r + rho*a_max_accel)^2 / (2*a_min_brake)
         - v_f^2 / (2*a_max_brake)]_+
    whenever the full-stop point dominates, and is computed through the
    generalized sup so it stays correct when it does not.
    """
    if v_r < 0.0 or v_f < 0.0:
        raise ValueError("speeds must be non-negative")
    return safe_distance_generalized(
        KinematicState(0.0, v_r, 0.0),
        KinematicState(0.0, v_f, 0.0),
        ProfileId.FRONT_MAX_BRAKE,
        ProfileId.RSS_REAR,
        p,
    )


def safe_distance_apb_closed_form(rear0: KinematicState, v_f: float, p: RssParams) -> float:
    """Closed-form safe distance for front-max-brake vs. rear jerk-bounded.

    Valid when the full-stop point dominates the sup (in particular when
    a_min_brake <= a_max_brake); ``safe_distance_apb`` asserts agreement
    in that regime.
    """
    sched = brake_schedule_jerk(rear0, p)
    return max(0.0, sched.d_total - v_f * v_f / (2.0 * p.a_max_brake))


def safe_distance_apb(rear0: KinematicState, v_f: float, p: RssParams) -> float:
    """Safe distance ahead of a rear car committing to the jerk-bounded response.

    Routed through the generalized sup computation; in the regime where
    the closed form is valid the two must agree, which is asserted here
    to guard both implementations.
    """
    if v_f < 0.0:
        raise ValueError("front speed must be non-negative")
    d = safe_distance_generalized(
        rear0,
        KinematicState(0.0, v_f, 0.0),
        ProfileId.FRONT_MAX_BRAKE,
        ProfileId.JERK_BOUNDED,
        p,
    )
    if p.a_min_brake <= p.a_max_brake:
        cf = safe_distance_apb_closed_form(rear0, v_f, p)
        assert abs(d - cf) <= _CLOSED_FORM_TOL + 1e-12 * max(1.0, cf), (
            f"generalized ({d}) and closed-form ({cf}) safe distances disagree"
        )
    return d


def is_dangerous(scene: SceneState, p: RssParams, latency: float = 0.0) -> SafetyVerdict:
    """Classify a scene: dangerous iff the gap is strictly below the safe distance.

    The boundary gap == d_safe is safe. With ``latency`` > 0 the scene is
    first advanced by that long under worst-case behavior (front braking
    at a_max_brake, rear accelerating at a_max_accel) and the verdict is
    rendered on the extrapolated scene.
    """
    gap, rear, front = scene.gap, scene.rear, scene.front
    if latency > 0.0:
        tf = min(latency, front.v / p.a_max_brake)
        d_f = front.v * tf - 0.5 * p.a_max_brake * tf * tf
        v_f = max(0.0, front.v - p.a_max_brake * tf)
        d_r = rear.v * latency + 0.5 * p.a_max_accel * latency ** 2
        v_r = rear.v + p.a_max_accel * latency
        gap = gap - (d_r - d_f)
        rear = KinematicState(rear.x + d_r, v_r, 0.0)
        front = KinematicState(front.x + d_f, v_f, front.a)
    a_meas = min(rear.a, 0.0)
    d_safe = safe_distance_apb(KinematicState(rear.x, rear.v, a_meas), front.v, p)
    margin = gap - d_safe
    return SafetyVerdict(dangerous=margin < 0.0, d_safe=d_safe, margin=margin)


def response_envelope(scene_at_t0: SceneState, p: RssParams, t0: float = 0.0) -> ResponseEnvelope:
    """Velocity envelopes from danger onset.

    Raises:
        ValueError: if the scene is still safe (there is no onset).
    """
    verdict = is_dangerous(scene_at_t0, p)
    if not verdict.dangerous:
        raise ValueError(
            f"scene is safe (margin {verdict.margin:.3f} m); no response envelope applies"
        )
    front_segs = velocity_segments(ProfileId.FRONT_MAX_BRAKE, scene_at_t0.front, p)
    rear0 = KinematicState(scene_at_t0.rear.x, scene_at_t0.rear.v, min(scene_at_t0.rear.a, 0.0))
    rear_segs = velocity_segments(ProfileId.JERK_BOUNDED, rear0, p)
    return ResponseEnvelope(
        t0=t0,
        front_min_velocity=lambda t: segment_velocity_at(front_segs, t),
        rear_max_velocity=lambda t: segment_velocity_at(rear_segs, t),
    )


@dataclass(frozen=True)
class ComplianceReport:
    """Result of checking a trace against the proper-response envelopes."""

    ok: bool
    onset_time: float | None
    rear_first_violation_t: float | None
    rear_max_violation: float
    front_first_violation_t: float | None
    front_max_violation: float


def check_compliance(trace, p: RssParams, tol: float = 1e-6) -> ComplianceReport:
    """Verify proper response over a simulated trace.

    From the first danger onset until the episode closes (scene safe
    again, rear stopped, or trace end), the front's speed must stay at or
    above its envelope and the rear's at or below its own, both frozen at
    the onset states. ``tol`` absorbs floating-point dust only — the
    simulator integrates exactly, so a compliant trace matches the
    envelopes to rounding error.

    The trace must expose ``t``, ``v_r``, ``v_f``, ``a_r``, ``a_f``,
    ``x_r``, ``x_f``, ``gap`` and ``dangerous`` arrays (see ``sim.Trace``).

    Raises:
        ValueError: on malformed traces (non-monotone timestamps).
    """
    t = trace.t
    if len(t) == 0:
        raise ValueError("empty trace")
    if any(t[i + 1] <= t[i] for i in range(len(t) - 1)):
        raise ValueError("trace timestamps must be strictly increasing")

    onset_idx = None
    for i, flag in enumerate(trace.dangerous):
        if flag:
            onset_idx = i
            break
    if onset_idx is None:
        return ComplianceReport(True, None, None, 0.0, None, 0.0)

    t0 = float(t[onset_idx])
    scene = SceneState(
        rear=KinematicState(float(trace.x_r[onset_idx]), float(trace.v_r[onset_idx]),
                            float(trace.a_r[onset_idx])),
        front=KinematicState(float(trace.x_f[onset_idx]), float(trace.v_f[onset_idx]),
                             float(trace.a_f[onset_idx])),
        gap=float(trace.gap[onset_idx]),
    )
    env = response_envelope(scene, p, t0=t0)

    rear_first, rear_max = None, 0.0
    front_first, front_max = None, 0.0
    for i in range(onset_idx, len(t)):
        tau = float(t[i]) - t0
        if i > onset_idx and (not trace.dangerous[i] or trace.v_r[i] <= 0.0):
            break  # episode closed: envelopes no longer bind
        rear_excess = float(trace.v_r[i]) - env.rear_max_velocity(tau)
        if rear_excess > tol:
            rear_first = rear_first if rear_first is not None else float(t[i])
            rear_max = max(rear_max, rear_excess)
        front_deficit = env.front_min_velocity(tau) - float(trace.v_f[i])
        if front_deficit > tol:
            front_first = front_first if front_first is not None else float(t[i])
            front_max = max(front_max, front_deficit)

    return ComplianceReport(
        ok=rear_first is None and front_first is None,
        onset_time=t0,
        rear_first_violation_t=rear_first,
        rear_max_violation=rear_max,
        front_first_violation_t=front_first,
        front_max_violation=front_max,
    )
