"""Jitted numeric core: exact step integration and the batch scenario kernel.

Everything here mirrors the reference implementations in ``profiles``,
``safety`` and ``controllers`` but is compiled with numba so that the
large verification and sweep runs (10^5 closed-loop scenarios) finish in
seconds. The test suite pins the two sides together: the jitted safe
distance must agree with the generalized sup computation, and batch runs
must reproduce the reference simulator's outcomes on random scenarios.

Within one decision step every commanded acceleration has the form

    a(s) = clip(a_ramp0 - jerk * s, a_lo, a_hi),   s in [0, dt]

(a constant command is the degenerate clip with a_lo == a_hi). The
integrator advances positions and velocities through the resulting
phases in closed form, clamping the velocity at zero, so the step size
carries no integration error — dt only sets the decision frequency.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Penetration beyond this depth counts as a collision; boundary-riding
# maneuvers (initial gap exactly equal to the safe distance) legitimately
# graze zero up to floating-point rounding and must not register.
COLLISION_EPS = 1e-9

# Scenario termination status codes.
STATUS_HORIZON = 0
STATUS_COLLISION = 1
STATUS_STANDSTILL = 2

# Controller codes for the batch kernel.
CTRL_NONE = 0
CTRL_APB = 1
CTRL_AEB = 2

# Intervention attempts closer together than this belong to the same
# dangerous situation and share one failure draw (see controllers).
EPISODE_REFRACTORY = 2.0

# Driver codes.
DRIVER_CONSTANT = 0
DRIVER_TAILGATER = 1
DRIVER_DISTRACTED = 2


@njit(cache=True)
def jb_schedule(v0, a0, j, a_min):
    """Jerk-bounded brake schedule -> (T, t_stop, v_T, d_jerk, d_total).

    ``a0`` may be any signed value; it is clamped into [-a_min, 0] (throttle
    is shed instantly, and deceleration beyond the committed level starts
    the profile directly in its constant phase).
    """
    if a0 > 0.0:
        a0 = 0.0
    elif a0 < -a_min:
        a0 = -a_min
    t1 = (a0 + a_min) / j
    t2 = (a0 + math.sqrt(a0 * a0 + 2.0 * j * v0)) / j
    if t2 <= t1:
        big_t = t2
        v_t = v0 + a0 * t2 - 0.5 * j * t2 * t2
        if v_t < 0.0:
            v_t = 0.0
        t_stop = t2
    else:
        big_t = t1
        v_t = v0 + a0 * t1 - 0.5 * j * t1 * t1
        if v_t < 0.0:
            v_t = 0.0
        t_stop = t1 + v_t / a_min
    d_jerk = v0 * big_t + 0.5 * a0 * big_t * big_t - j * big_t ** 3 / 6.0
    d_total = d_jerk + v_t * v_t / (2.0 * a_min)
    return big_t, t_stop, v_t, d_jerk, d_total


@njit(cache=True)
def _jb_dist(t, v0, a0, j, a_min, big_t, t_stop, v_t, d_jerk, d_total):
    if t < big_t:
        return v0 * t + 0.5 * a0 * t * t - j * t ** 3 / 6.0
    if t < t_stop:
        tau = t - big_t
        return d_jerk + v_t * tau - 0.5 * a_min * tau * tau
    return d_total


@njit(cache=True)
def _cb_dist(t, v0, a_brake):
    ts = v0 / a_brake
    if t < ts:
        return v0 * t - 0.5 * a_brake * t * t
    return v0 * v0 / (2.0 * a_brake)


@njit(cache=True)
def _first_root_in(c2, c1, c0, hmax):
    """Smallest root of c2*h^2 + c1*h + c0 in (0, hmax], or -1."""
    if c2 > -1e-300 and c2 < 1e-300:
        if c1 == 0.0:
            return -1.0
        r = -c0 / c1
        if 0.0 < r <= hmax:
            return r
        return -1.0
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return -1.0
    sq = math.sqrt(disc)
    r1 = (-c1 - sq) / (2.0 * c2)
    r2 = (-c1 + sq) / (2.0 * c2)
    if r1 > r2:
        r1, r2 = r2, r1
    if 0.0 < r1 <= hmax:
        return r1
    if 0.0 < r2 <= hmax:
        return r2
    return -1.0


@njit(cache=True)
def apb_safe_distance(v_r, a_r, v_f, j, a_min, a_max):
    """Safe distance for the front-max-brake vs. rear jerk-bounded pair.

    In the standard regime (a_min <= a_max) the rear never out-brakes the
    front and the full-stop difference dominates the sup; otherwise the
    sup may sit at an interior crossing of the velocity curves and is
    located exactly from the finite candidate set.
    """
    a0 = a_r if a_r < 0.0 else 0.0
    if a0 < -a_min:
        a0 = -a_min
    big_t, t_stop, v_t, d_jerk, d_total = jb_schedule(v_r, a0, j, a_min)
    d_end = d_total - v_f * v_f / (2.0 * a_max)
    if a_min <= a_max:
        return d_end if d_end > 0.0 else 0.0

    best = d_end if d_end > 0.0 else 0.0
    ts_f = v_f / a_max
    t_max = t_stop if t_stop > ts_f else ts_f
    bps = np.empty(5)
    bps[0] = 0.0
    bps[1] = big_t
    bps[2] = t_stop
    bps[3] = ts_f
    bps[4] = t_max
    bps = np.sort(bps)
    for i in range(4):
        u = bps[i]
        w = bps[i + 1]
        if w - u <= 1e-15 or u >= t_max:
            continue
        # polynomial pieces of v_r and v_f valid just after u
        if u < big_t:
            r0 = v_r + a0 * u - 0.5 * j * u * u
            r1 = a0 - j * u
            r2 = -0.5 * j
        elif u < t_stop:
            r0 = v_t - a_min * (u - big_t)
            r1 = -a_min
            r2 = 0.0
        else:
            r0 = 0.0
            r1 = 0.0
            r2 = 0.0
        if u < ts_f:
            f0 = v_f - a_max * u
            f1 = -a_max
        else:
            f0 = 0.0
            f1 = 0.0
        # stationary points of the relative displacement: v_r == v_f
        c2 = r2
        c1 = r1 - f1
        c0 = r0 - f0
        h = w - u
        if c2 > 1e-300 or c2 < -1e-300:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc >= 0.0:
                sq = math.sqrt(disc)
                for x in ((-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)):
                    if 0.0 < x < h:
                        t = u + x
                        d = (_jb_dist(t, v_r, a0, j, a_min, big_t, t_stop, v_t,
                                      d_jerk, d_total)
                             - _cb_dist(t, v_f, a_max))
                        if d > best:
                            best = d
        elif c1 != 0.0:
            x = -c0 / c1
            if 0.0 < x < h:
                t = u + x
                d = (_jb_dist(t, v_r, a0, j, a_min, big_t, t_stop, v_t, d_jerk, d_total)
                     - _cb_dist(t, v_f, a_max))
                if d > best:
                    best = d
        # breakpoint itself is a candidate
        d = (_jb_dist(w, v_r, a0, j, a_min, big_t, t_stop, v_t, d_jerk, d_total)
             - _cb_dist(w, v_f, a_max))
        if d > best:
            best = d
    return best


@njit(cache=True)
def monitor_margin(gap, v_r, rear_cmd, v_f, look, j, a_min, a_max):
    """Safety margin of the scene extrapolated ``look`` seconds ahead.

    Worst case on the front (brakes at a_max), exact on the rear (holds
    ``rear_cmd``). Mirrors ``controllers.apb_monitor_margin``.
    """
    if look > 0.0:
        tf = v_f / a_max
        if look < tf:
            tf = look
        d_f = v_f * tf - 0.5 * a_max * tf * tf
        v_f2 = v_f - a_max * tf
        if v_f2 < 0.0:
            v_f2 = 0.0
        if rear_cmd < 0.0:
            tr = v_r / -rear_cmd
            if look < tr:
                tr = look
        else:
            tr = look
        d_r = v_r * tr + 0.5 * rear_cmd * tr * tr
        v_r2 = v_r + rear_cmd * tr
        if v_r2 < 0.0:
            v_r2 = 0.0
        gap = gap - (d_r - d_f)
        v_r = v_r2
        v_f = v_f2
    a0 = rear_cmd if rear_cmd < 0.0 else 0.0
    return gap - apb_safe_distance(v_r, a0, v_f, j, a_min, a_max)


@njit(cache=True)
def advance(x, v, a_hi, a_ramp0, jerk, a_lo, tau):
    """Exact state after ``tau`` under a(s) = clip(a_ramp0 - jerk*s, a_lo, a_hi).

    The velocity is clamped at zero: a stopped car with a non-positive
    command stays put (vehicles never reverse). Returns (x', v', a_inst)
    where a_inst is the acceleration acting at tau (zero when stopped).
    Requires a_lo <= a_hi and jerk >= 0.
    """
    s = 0.0
    while s < tau:
        if jerk > 0.0:
            ramp = a_ramp0 - jerk * s
            if ramp > a_hi:
                a_cur = a_hi
                seg_end = s + (ramp - a_hi) / jerk
                linear = False
            elif ramp > a_lo:
                a_cur = ramp
                seg_end = s + (ramp - a_lo) / jerk
                linear = True
            else:
                a_cur = a_lo
                seg_end = tau
                linear = False
        else:
            a_cur = a_ramp0
            if a_cur > a_hi:
                a_cur = a_hi
            if a_cur < a_lo:
                a_cur = a_lo
            seg_end = tau
            linear = False
        if seg_end <= s:
            # phase boundary within rounding of s: nudge so the loop advances
            seg_end = s + (s * 1e-15 + 1e-300)
        if seg_end > tau:
            seg_end = tau
        h = seg_end - s
        if v <= 0.0 and a_cur <= 0.0:
            v = 0.0
            s = seg_end
            continue
        if linear:
            h_stop = _first_root_in(-0.5 * jerk, a_cur, v, h)
            if h_stop > 0.0:
                x += v * h_stop + 0.5 * a_cur * h_stop * h_stop - jerk * h_stop ** 3 / 6.0
                v = 0.0
                s = seg_end
                continue
            x += v * h + 0.5 * a_cur * h * h - jerk * h ** 3 / 6.0
            v = v + a_cur * h - 0.5 * jerk * h * h
            if v < 0.0:
                v = 0.0
        else:
            if a_cur < 0.0:
                h_stop = v / -a_cur
                if h_stop <= h:
                    x += v * h_stop + 0.5 * a_cur * h_stop * h_stop
                    v = 0.0
                    s = seg_end
                    continue
            x += v * h + 0.5 * a_cur * h * h
            v += a_cur * h
            if v < 0.0:
                v = 0.0
        s = seg_end
    a_inst = a_ramp0 - jerk * tau if jerk > 0.0 else a_ramp0
    if a_inst > a_hi:
        a_inst = a_hi
    if a_inst < a_lo:
        a_inst = a_lo
    if v <= 0.0 and a_inst <= 0.0:
        v = 0.0
        a_inst = 0.0
    return x, v, a_inst


@njit(cache=True)
def _gap_at(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, a_f, s):
    dxr, _, _ = advance(0.0, vr, r_hi, r_r0, r_j, r_lo, s)
    dxf, _, _ = advance(0.0, vf, a_f, a_f, 0.0, a_f, s)
    return gap0 + dxf - dxr


@njit(cache=True)
def _rel_vel_at(vr, r_hi, r_r0, r_j, r_lo, vf, a_f, s):
    _, vr_s, _ = advance(0.0, vr, r_hi, r_r0, r_j, r_lo, s)
    _, vf_s, _ = advance(0.0, vf, a_f, a_f, 0.0, a_f, s)
    return vf_s - vr_s


@njit(cache=True)
def step_pair(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, a_f, dt):
    """One exact joint step; returns end states, the in-step minimum gap
    and a collision time (-1 if none).

    Output tuple: (dxr, vr_e, ar_e, dxf, vf_e, af_e, min_gap, t_coll).

    When the rear car provably cannot close to within 0.25 m this step,
    only the endpoint gap is tracked (the interior of the step cannot
    contain a near-zero minimum); otherwise the true in-step minimum is
    located from the phase boundaries and the roots of the relative
    velocity, and any penetration time is resolved by bisection.
    """
    dxr, vr_e, ar_e = advance(0.0, vr, r_hi, r_r0, r_j, r_lo, dt)
    dxf, vf_e, af_e = advance(0.0, vf, a_f, a_f, 0.0, a_f, dt)
    gap_end = gap0 + dxf - dxr
    min_gap = gap_end if gap_end < gap0 else gap0

    a_top = r_hi if r_hi > 0.0 else 0.0
    travel_bound = vr * dt + 0.5 * a_top * dt * dt
    if gap0 - travel_bound > 0.25 and gap_end > 0.0:
        return dxr, vr_e, ar_e, dxf, vf_e, af_e, min_gap, -1.0

    # candidate boundary times: command phase changes and stop times
    cand = np.empty(24)
    n_c = 0
    cand[n_c] = 0.0
    n_c += 1
    cand[n_c] = dt
    n_c += 1
    if r_j > 0.0:
        s1 = (r_r0 - r_hi) / r_j
        if 0.0 < s1 < dt:
            cand[n_c] = s1
            n_c += 1
        s2 = (r_r0 - r_lo) / r_j
        if 0.0 < s2 < dt:
            cand[n_c] = s2
            n_c += 1
    if vr_e <= 0.0 and vr > 0.0:
        # rear stop time: bisect on velocity (monotone to its zero)
        lo = 0.0
        hi = dt
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            _, v_m, _ = advance(0.0, vr, r_hi, r_r0, r_j, r_lo, mid)
            if v_m > 0.0:
                lo = mid
            else:
                hi = mid
        cand[n_c] = hi
        n_c += 1
    if a_f < 0.0 and vf > 0.0:
        ts_f = vf / -a_f
        if ts_f < dt:
            cand[n_c] = ts_f
            n_c += 1

    bounds = np.sort(cand[:n_c])
    n_b = n_c
    # roots of the relative velocity inside each sub-interval
    for i in range(n_b - 1):
        u = bounds[i]
        w = bounds[i + 1]
        h = w - u
        if h <= 1e-15:
            continue
        g0 = _rel_vel_at(vr, r_hi, r_r0, r_j, r_lo, vf, a_f, u)
        gm = _rel_vel_at(vr, r_hi, r_r0, r_j, r_lo, vf, a_f, u + 0.5 * h)
        g1 = _rel_vel_at(vr, r_hi, r_r0, r_j, r_lo, vf, a_f, w)
        c2 = 2.0 * (g0 - 2.0 * gm + g1) / (h * h)
        c1 = (-3.0 * g0 + 4.0 * gm - g1) / h
        c0 = g0
        r = _first_root_in(c2, c1, c0, h)
        if r > 0.0 and n_c < 24:
            cand[n_c] = u + r
            n_c += 1
            # a quadratic can have a second root in the interval
            if abs(c2) > 1e-300:
                other = c0 / (c2 * r)  # product of roots = c0/c2
                if r < other < h and n_c < 24:
                    cand[n_c] = u + other
                    n_c += 1

    pts = np.sort(cand[:n_c])
    min_gap = gap0
    t_min = 0.0
    for i in range(n_c):
        g = _gap_at(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, a_f, pts[i])
        if g < min_gap:
            min_gap = g
            t_min = pts[i]

    t_coll = -1.0
    if min_gap <= -COLLISION_EPS:
        # earliest zero crossing: bracket between the last sampled point
        # with positive gap and the first with gap <= 0
        lo = 0.0
        hi = t_min
        for i in range(n_c):
            if pts[i] >= t_min:
                break
            g = _gap_at(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, a_f, pts[i])
            if g > 0.0:
                lo = pts[i]
            else:
                hi = pts[i]
                break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _gap_at(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, a_f, mid) > 0.0:
                lo = mid
            else:
                hi = mid
        t_coll = hi
    return dxr, vr_e, ar_e, dxf, vf_e, af_e, min_gap, t_coll


@njit(cache=True)
def run_batch(
    dt,
    n_steps,
    # per-scenario parameters
    a_max_brake, a_min_brake, a_max_accel, j_max, ceiling, look,
    gap0, vr0, ar0, vf0, af0,
    # piecewise-constant front scripts, CSR layout with absolute switch times
    script_off, script_t, script_a, script_sufmax,
    driver_code, drv_p1, drv_p2,
    ctrl_code, ttc_thr, brake_mag, p_fail, kernel_seed,
    # outputs, all (n,)
    out_status, out_min_gap, out_coll_t, out_end_t, out_final_gap,
    out_n_eps, out_n_int, out_n_sup, out_max_dec, out_max_jerk_step,
):
    """Simulate a batch of sensor-free scenarios; aggregates only.

    Semantics mirror ``sim.run`` exactly (same monitor, same controller
    transitions, same exact integrator); randomness is consumed only for
    per-episode failure draws, seeded per scenario.
    """
    n = gap0.shape[0]
    for s in range(n):
        np.random.seed(kernel_seed[s])
        a_max = a_max_brake[s]
        a_min = a_min_brake[s]
        j = j_max[s]
        ceil_a = ceiling[s]
        lk = look[s]
        x_r = 0.0
        v_r = vr0[s]
        a_r_meas = ar0[s]
        x_f = gap0[s]
        v_f = vf0[s]
        a_f_meas = af0[s]
        a_f_cur = af0[s]
        sp = script_off[s]
        sp_end = script_off[s + 1]

        mode_int = False  # APB intervening / AEB latched
        onset_t = 0.0
        a_onset = 0.0
        outcome_valid = False  # current failure-draw unit
        outcome_failed = False
        last_active_t = -1e18
        episode_open = False
        prev_cmd = 0.0
        drv_since = -1.0
        drv_reacting = False

        min_gap = gap0[s]
        status = STATUS_HORIZON
        coll_t = -1.0
        n_eps = 0
        n_int = 0
        n_sup = 0
        max_dec = 0.0
        max_jerk = 0.0
        t_end = n_steps * dt

        drv = driver_code[s]
        ctrl = ctrl_code[s]

        if gap0[s] <= -COLLISION_EPS:
            status = STATUS_COLLISION
            coll_t = 0.0
            t_end = 0.0
            n_left = 0
        else:
            n_left = n_steps

        for k in range(n_left):
            t = k * dt
            gap = x_f - x_r
            while sp < sp_end and script_t[sp] <= t:
                a_f_cur = script_a[sp]
                sp += 1

            # driver
            if drv == DRIVER_TAILGATER:
                a_d = drv_p2[s] * (gap - drv_p1[s])
                if a_d > ceil_a:
                    a_d = ceil_a
                elif a_d < -ceil_a:
                    a_d = -ceil_a
            elif drv == DRIVER_DISTRACTED:
                if a_f_meas < -1e-9:
                    if drv_since < 0.0:
                        drv_since = t
                else:
                    drv_since = -1.0
                if drv_reacting:
                    if v_r <= v_f:
                        drv_reacting = False
                elif drv_since >= 0.0 and t - drv_since >= drv_p1[s]:
                    drv_reacting = True
                a_d = -drv_p2[s] if drv_reacting else 0.0
            else:
                a_d = 0.0

            # mutual standstill: nothing will ever move again
            if v_r <= 1e-12 and v_f <= 1e-12 and a_d <= 0.0 and a_f_cur <= 0.0:
                future = script_sufmax[sp] if sp < sp_end else -1.0
                if future <= 0.0:
                    status = STATUS_STANDSTILL
                    t_end = t
                    break

            # instantaneous danger classification (episode bookkeeping)
            a0_meas = a_r_meas if a_r_meas < 0.0 else 0.0
            d_inst = apb_safe_distance(v_r, a0_meas, v_f, j, a_min, a_max)
            inst_danger = gap < d_inst
            if inst_danger and not episode_open:
                episode_open = True
                n_eps += 1
            elif not inst_danger:
                episode_open = False

            # controller
            r_hi = a_d
            r_r0 = a_d
            r_j = 0.0
            r_lo = a_d
            cmd_now = a_d
            active = False
            if ctrl == CTRL_APB:
                margin = monitor_margin(gap, v_r, a_d, v_f, lk, j, a_min, a_max)
                danger = margin < 0.0
                # release on standstill or once resolved: safe AND no longer
                # closing (mirrors controllers.apb_step)
                if mode_int and (v_r <= 1e-12 or (not danger and v_r <= v_f)):
                    mode_int = False
                if not mode_int and danger:
                    # failure-draw unit: one draw per dangerous situation
                    # (attempts within the refractory window share it)
                    if not outcome_valid or t - last_active_t >= EPISODE_REFRACTORY:
                        outcome_valid = True
                        outcome_failed = (p_fail[s] > 0.0
                                          and np.random.random() < p_fail[s])
                        if outcome_failed:
                            n_sup += 1
                    if outcome_failed:
                        last_active_t = t
                    else:
                        mode_int = True
                        onset_t = t
                        a_onset = a_d if a_d < 0.0 else 0.0
                        n_int += 1
                if mode_int:
                    last_active_t = t
                    ramp = a_onset - j * (t - onset_t)
                    if a_d <= -a_min:
                        # driver out-brakes the intervention floor
                        r_hi = a_d
                        r_r0 = a_d
                        r_j = 0.0
                        r_lo = a_d
                        cmd_now = a_d
                    else:
                        r_hi = a_d
                        r_r0 = ramp
                        r_j = j
                        r_lo = -a_min
                        cmd_now = ramp
                        if cmd_now < -a_min:
                            cmd_now = -a_min
                        if cmd_now > a_d:
                            cmd_now = a_d
                    active = True
            elif ctrl == CTRL_AEB:
                if mode_int and (v_r <= v_f or v_r <= 1e-12):
                    mode_int = False
                if not mode_int:
                    if gap <= 0.0:
                        mode_int = True
                        n_int += 1
                    elif v_r > v_f and gap / (v_r - v_f) <= ttc_thr[s]:
                        mode_int = True
                        n_int += 1
                if mode_int:
                    cmd_now = -brake_mag[s]
                    r_hi = cmd_now
                    r_r0 = cmd_now
                    r_j = 0.0
                    r_lo = cmd_now
                    active = True

            if active:
                # include the entry step: a hard baseline jumps from the
                # driver command to full brake in one decision interval
                if k > 0:
                    dj = abs(cmd_now - prev_cmd)
                    if dj > max_jerk:
                        max_jerk = dj
                if -cmd_now > max_dec:
                    max_dec = -cmd_now
            prev_cmd = cmd_now

            dxr, v_r2, a_r2, dxf, v_f2, a_f2, mg, t_c = step_pair(
                gap, v_r, r_hi, r_r0, r_j, r_lo, v_f, a_f_cur, dt
            )
            if mg < min_gap:
                min_gap = mg
            if t_c >= 0.0:
                status = STATUS_COLLISION
                coll_t = t + t_c
                t_end = t + t_c
                dxr, v_r, a_r_meas = advance(0.0, v_r, r_hi, r_r0, r_j, r_lo, t_c)
                dxf, v_f, a_f_meas = advance(0.0, v_f, a_f_cur, a_f_cur, 0.0, a_f_cur, t_c)
                x_r += dxr
                x_f += dxf
                break
            x_r += dxr
            v_r = v_r2
            a_r_meas = a_r2
            x_f += dxf
            v_f = v_f2
            a_f_meas = a_f2

        out_status[s] = status
        out_min_gap[s] = min_gap
        out_coll_t[s] = coll_t
        out_end_t[s] = t_end
        out_final_gap[s] = x_f - x_r
        out_n_eps[s] = n_eps
        out_n_int[s] = n_int
        out_n_sup[s] = n_sup
        out_max_dec[s] = max_dec
        out_max_jerk_step[s] = max_jerk
