"""Safe distances, danger classification, envelopes, and trace compliance."""

import warnings
from types import SimpleNamespace

import numpy as np
import pytest

from apbsim.params import KinematicState, RssParams
from apbsim.profiles import ProfileId, distance_traveled, stop_time
from apbsim.safety import (
    SceneState,
    check_compliance,
    is_dangerous,
    response_envelope,
    safe_distance_apb,
    safe_distance_apb_closed_form,
    safe_distance_generalized,
    safe_distance_rss,
)

from oracles import dense_sup_requirement


def quiet_params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RssParams(**kw)


def sup_oracle(rear0, front0, br, bf, p, dt=1e-4):
    t_max = max(stop_time(br, rear0, p), stop_time(bf, front0, p), 1e-3) + 0.5
    return dense_sup_requirement(
        lambda ts: distance_traveled(br, rear0, p, ts),
        lambda ts: distance_traveled(bf, front0, p, ts),
        t_max, dt,
    )


class TestGeneralizedSafeDistance:
    def test_identical_profiles_and_states(self, default_params):
        s = KinematicState(0.0, 17.0, 0.0)
        d = safe_distance_generalized(s, s, ProfileId.JERK_BOUNDED,
                                      ProfileId.JERK_BOUNDED, default_params)
        assert d == 0.0

    def test_weaker_rear_full_stop_dominates(self, default_params):
        rear = KinematicState(0.0, 20.0, 0.0)
        front = KinematicState(0.0, 20.0, 0.0)
        d = safe_distance_generalized(rear, front, ProfileId.FRONT_MAX_BRAKE,
                                      ProfileId.JERK_BOUNDED, default_params)
        assert d == pytest.approx(133.0 / 3.0, abs=1e-9)
        assert d == pytest.approx(
            sup_oracle(rear, front, ProfileId.JERK_BOUNDED, ProfileId.FRONT_MAX_BRAKE,
                       default_params), abs=1e-6)

    def test_fast_front_slow_rear_clamps_to_zero(self, default_params):
        rear = KinematicState(0.0, 5.0, 0.0)
        front = KinematicState(0.0, 30.0, 0.0)
        d = safe_distance_generalized(rear, front, ProfileId.FRONT_MAX_BRAKE,
                                      ProfileId.JERK_BOUNDED, default_params)
        assert d == pytest.approx(
            sup_oracle(rear, front, ProfileId.JERK_BOUNDED, ProfileId.FRONT_MAX_BRAKE,
                       default_params), abs=1e-6)
        assert d == 0.0

    def test_fast_rear_slow_front(self, default_params):
        rear = KinematicState(0.0, 30.0, 0.0)
        front = KinematicState(0.0, 5.0, 0.0)
        d = safe_distance_generalized(rear, front, ProfileId.FRONT_MAX_BRAKE,
                                      ProfileId.JERK_BOUNDED, default_params)
        assert d == pytest.approx(
            sup_oracle(rear, front, ProfileId.JERK_BOUNDED, ProfileId.FRONT_MAX_BRAKE,
                       default_params), abs=1e-6)

    def test_interior_crossing_dominates(self):
        # rear out-brakes the front: the sup sits at the velocity crossing
        # t=0.25 (value 0.25 m), far above the clamped full-stop difference
        p = quiet_params(rho=0.0, a_min_brake=10.0, a_max_brake=2.0, a_max_accel=0.0)
        rear = KinematicState(0.0, 20.0, 0.0)
        front = KinematicState(0.0, 18.0, 0.0)
        d = safe_distance_generalized(rear, front, ProfileId.FRONT_MAX_BRAKE,
                                      ProfileId.RSS_REAR, p)
        assert d == pytest.approx(0.25, abs=1e-12)
        assert d == pytest.approx(
            sup_oracle(rear, front, ProfileId.RSS_REAR, ProfileId.FRONT_MAX_BRAKE, p),
            abs=1e-6)

    def test_random_draws_match_dense_grid_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            p = quiet_params(
                rho=rng.uniform(0.0, 2.0),
                a_max_brake=rng.uniform(1.0, 12.0),
                a_min_brake=rng.uniform(1.0, 10.0),
                a_max_accel=rng.uniform(0.0, 3.0),
                j_max=rng.uniform(0.5, 10.0),
            )
            rear = KinematicState(0.0, rng.uniform(0.0, 40.0),
                                  rng.uniform(-p.a_min_brake, 0.0))
            front = KinematicState(0.0, rng.uniform(0.0, 40.0), 0.0)
            br = (ProfileId.JERK_BOUNDED, ProfileId.RSS_REAR)[rng.integers(0, 2)]
            d = safe_distance_generalized(rear, front, ProfileId.FRONT_MAX_BRAKE, br, p)
            assert d == pytest.approx(
                sup_oracle(rear, front, br, ProfileId.FRONT_MAX_BRAKE, p), abs=1e-6)


class TestRssSafeDistance:
    def test_all_zero(self):
        assert safe_distance_rss(0.0, 0.0, quiet_params(rho=0.0)) == 0.0

    def test_matched_speeds_closed_form(self):
        p = RssParams(rho=1.0)
        # 20*1 + 0.5*2*1 + 22^2/8 - 400/16 = 56.5
        assert safe_distance_rss(20.0, 20.0, p) == pytest.approx(56.5, abs=1e-9)

    def test_stopped_rear_fast_front(self):
        p = quiet_params(rho=0.0)
        assert safe_distance_rss(0.0, 30.0, p) == 0.0

    def test_degenerate_consistency(self):
        # rho=0 and no response acceleration: [v^2/(2 a_min) - v^2/(2 a_max)]_+
        p = quiet_params(rho=0.0, a_max_accel=0.0)
        for v in (0.0, 7.0, 20.0, 33.0):
            expect = max(0.0, v * v / (2 * p.a_min_brake) - v * v / (2 * p.a_max_brake))
            assert safe_distance_rss(v, v, p) == pytest.approx(expect, abs=1e-9)

    def test_rejects_negative_speed(self):
        with pytest.raises(ValueError):
            safe_distance_rss(-1.0, 0.0, RssParams())


class TestApbSafeDistance:
    def test_matched_cruise(self, default_params):
        d = safe_distance_apb(KinematicState(0.0, 20.0, 0.0), 20.0, default_params)
        assert d == pytest.approx(133.0 / 3.0, abs=1e-9)

    def test_both_stopped(self, default_params):
        assert safe_distance_apb(KinematicState(0.0, 0.0, 0.0), 0.0, default_params) == 0.0

    def test_tailgating_example(self, default_params):
        d = safe_distance_apb(KinematicState(0.0, 10.0, 0.0), 9.99, default_params)
        # d_total = 21.8333..., front term = 9.99^2/16
        assert d == pytest.approx(131.0 / 6.0 - 9.99 ** 2 / 16.0, abs=1e-9)
        assert d == pytest.approx(15.5958, abs=1e-4)

    def test_closed_form_agreement_in_regime(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a_min = rng.uniform(1.0, 8.0)
            p = RssParams(a_max_brake=rng.uniform(a_min, 12.0), a_min_brake=a_min,
                          j_max=rng.uniform(0.5, 10.0))
            rear = KinematicState(0.0, rng.uniform(0.0, 40.0), rng.uniform(-12.0, 0.0))
            v_f = rng.uniform(0.0, 40.0)
            assert safe_distance_apb(rear, v_f, p) == pytest.approx(
                safe_distance_apb_closed_form(rear, v_f, p), abs=1e-9)

    def test_monotonicity_spot_checks(self, default_params):
        p = default_params
        base = safe_distance_apb(KinematicState(0, 20, 0), 15.0, p)
        assert safe_distance_apb(KinematicState(0, 25, 0), 15.0, p) >= base
        assert safe_distance_apb(KinematicState(0, 20, 0), 20.0, p) <= base
        assert safe_distance_apb(KinematicState(0, 20, 0), 15.0,
                                 RssParams(j_max=4.0)) <= base
        assert safe_distance_apb(KinematicState(0, 20, 0), 15.0,
                                 RssParams(a_min_brake=6.0)) <= base
        assert safe_distance_apb(KinematicState(0, 20, 0), 15.0,
                                 RssParams(a_max_brake=12.0)) >= base

    def test_profile_tightness(self, default_params):
        # launch both profiles from a gap of exactly d_safe: the minimum gap
        # grazes zero and, with the full stop dominating, the final gap is zero
        rng = np.random.default_rng(12)
        p = default_params
        for _ in range(40):
            rear = KinematicState(0.0, rng.uniform(0.0, 40.0), 0.0)
            front = KinematicState(0.0, rng.uniform(0.0, 40.0), 0.0)
            d_safe = safe_distance_apb(rear, front.v, p)
            t_max = max(stop_time(ProfileId.JERK_BOUNDED, rear, p),
                        stop_time(ProfileId.FRONT_MAX_BRAKE, front, p))
            ts = np.linspace(0.0, t_max + 0.1, 4001)
            gap = d_safe + (distance_traveled(ProfileId.FRONT_MAX_BRAKE, front, p, ts)
                            - distance_traveled(ProfileId.JERK_BOUNDED, rear, p, ts))
            assert gap.min() >= -1e-9
            if d_safe > 0.0:
                assert gap[-1] <= 1e-6


class TestIsDangerous:
    def test_paper_tailgating_scene(self, default_params):
        scene = SceneState(KinematicState(0, 10, 0), KinematicState(0.03, 9.99, 0), 0.03)
        v = is_dangerous(scene, default_params)
        assert v.dangerous
        assert v.margin == pytest.approx(0.03 - v.d_safe)

    def test_wide_gap_safe(self, default_params):
        scene = SceneState(KinematicState(0, 10, 0), KinematicState(100, 9.99, 0), 100.0)
        v = is_dangerous(scene, default_params)
        assert not v.dangerous
        assert v.margin == pytest.approx(100.0 - 15.595827083333333, abs=1e-9)

    def test_boundary_gap_is_safe(self, default_params):
        rear = KinematicState(0, 20, 0)
        d = safe_distance_apb(rear, 20.0, default_params)
        scene = SceneState(rear, KinematicState(d, 20, 0), d)
        assert not is_dangerous(scene, default_params).dangerous

    def test_tailgating_scene_dangerous_under_every_bundled_preset(self):
        from apbsim.scenario_io import load_scenario

        scene = SceneState(KinematicState(0, 10, 0), KinematicState(0.03, 9.99, 0), 0.03)
        for name in ("paper_sec2_ttc", "worst_case_front", "tailgater_population"):
            p = load_scenario(name).params
            assert is_dangerous(scene, p).dangerous, name

    def test_latency_is_conservative(self, default_params):
        rear = KinematicState(0, 20, 0)
        d = safe_distance_apb(rear, 20.0, default_params)
        scene = SceneState(rear, KinematicState(d + 0.5, 20, 0), d + 0.5)
        assert not is_dangerous(scene, default_params).dangerous
        assert is_dangerous(scene, default_params, latency=0.1).dangerous


class TestResponseEnvelope:
    def test_front_envelope_ramp(self, default_params):
        scene = SceneState(KinematicState(0, 20, 0), KinematicState(1.0, 20, 0), 1.0)
        env = response_envelope(scene, default_params)
        assert env.front_min_velocity(1.0) == pytest.approx(12.0)

    def test_rear_envelope_follows_schedule(self, default_params):
        scene = SceneState(KinematicState(0, 20, 0), KinematicState(1.0, 20, 0), 1.0)
        env = response_envelope(scene, default_params)
        assert env.rear_max_velocity(2.0) == pytest.approx(16.0)

    def test_stopped_rear_envelope_is_zero(self, default_params):
        scene = SceneState(KinematicState(0, 0, 0), KinematicState(0.01, 5.0, -8.0), 0.01)
        # force a dangerous scene with a stopped rear is impossible (its safe
        # distance is zero), so the construction must be rejected instead
        with pytest.raises(ValueError, match="safe"):
            response_envelope(scene, default_params)

    def test_rejects_safe_scene(self, default_params):
        scene = SceneState(KinematicState(0, 10, 0), KinematicState(500, 10, 0), 500.0)
        with pytest.raises(ValueError, match="safe"):
            response_envelope(scene, default_params)


def _synthetic_trace(p, gap0, v_r0, v_f0, rear_accels, front_accels, dt=0.01):
    """Euler-free synthetic trace: piecewise-constant accelerations, exact."""
    n = len(rear_accels)
    t = np.arange(n) * dt
    v_r = np.empty(n)
    v_f = np.empty(n)
    x_r = np.empty(n)
    x_f = np.empty(n)
    vr, vf, xr, xf = v_r0, v_f0, 0.0, gap0
    for i in range(n):
        v_r[i], v_f[i], x_r[i], x_f[i] = vr, vf, xr, xf
        xr += vr * dt + 0.5 * rear_accels[i] * dt * dt
        xf += vf * dt + 0.5 * front_accels[i] * dt * dt
        vr = max(0.0, vr + rear_accels[i] * dt)
        vf = max(0.0, vf + front_accels[i] * dt)
    gap = x_f - x_r
    d_safe = np.array([
        safe_distance_apb(KinematicState(x_r[i], v_r[i], min(rear_accels[i], 0.0)),
                          v_f[i], p)
        for i in range(n)
    ])
    return SimpleNamespace(
        t=t, x_r=x_r, v_r=v_r, a_r=np.asarray(rear_accels, dtype=float),
        x_f=x_f, v_f=v_f, a_f=np.asarray(front_accels, dtype=float),
        gap=gap, d_safe=d_safe, dangerous=gap < d_safe,
    )


class TestCheckCompliance:
    def test_no_danger_passes(self, default_params):
        tr = _synthetic_trace(default_params, 500.0, 10.0, 10.0,
                              [0.0] * 50, [0.0] * 50)
        rep = check_compliance(tr, default_params)
        assert rep.ok and rep.onset_time is None

    def test_rear_constant_speed_fails_first_step(self, default_params):
        # danger from the start; rear never brakes: its speed exceeds the
        # decaying envelope from the first step after onset
        tr = _synthetic_trace(default_params, 1.0, 20.0, 20.0,
                              [0.0] * 100, [-8.0] * 100)
        rep = check_compliance(tr, default_params)
        assert not rep.ok
        assert rep.rear_first_violation_t == pytest.approx(tr.t[1])
        assert rep.rear_max_violation > 0.0

    def test_front_overbraking_flagged(self, default_params):
        # front brakes at 1.25 * a_max_brake: it violates its own envelope,
        # exempting the rear from blame
        p = default_params
        rear = [-p.a_min_brake] * 200  # rear over-complies
        front = [-1.25 * p.a_max_brake] * 200
        tr = _synthetic_trace(p, 1.0, 20.0, 20.0, rear, front)
        rep = check_compliance(tr, p)
        assert rep.front_first_violation_t is not None
        assert rep.front_max_violation > 0.0
        assert rep.rear_first_violation_t is None

    def test_rejects_non_monotone_timestamps(self, default_params):
        tr = _synthetic_trace(default_params, 1.0, 20.0, 20.0, [0.0] * 5, [0.0] * 5)
        tr.t = np.array([0.0, 0.01, 0.01, 0.03, 0.04])
        with pytest.raises(ValueError, match="increasing"):
            check_compliance(tr, default_params)

    def test_compliant_closed_loop_trace_passes(self, default_params):
        from apbsim.sim import ApbControl, Scenario, run, worst_case_front_script
        from apbsim.controllers import ConstantSpeed

        p = default_params
        rear = KinematicState(0.0, 20.0, 0.0)
        d = safe_distance_apb(rear, 20.0, p)
        sc = Scenario(
            params=p,
            initial=SceneState(rear, KinematicState(d - 1.0, 20.0, 0.0), d - 1.0),
            front_script=worst_case_front_script(p),
            driver=ConstantSpeed(),
            controller=ApbControl(),
            horizon=10.0,
        )
        tr = run(sc)
        rep = check_compliance(tr, p)
        assert rep.ok, rep
