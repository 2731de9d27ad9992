"""The jitted numeric core against the reference implementations.

The batch kernel re-implements the monitor, controllers and integrator
for speed; these tests pin every piece to its pure-Python counterpart on
random inputs, and whole batch runs to the reference simulator.
"""

import warnings

import numpy as np
import pytest

from apbsim import engine
from apbsim.controllers import apb_monitor_margin, AebConfig, ConstantSpeed, DistractedFollower, Tailgater
from apbsim.params import KinematicState, RssParams
from apbsim.profiles import ProfileId, brake_schedule_jerk, jerk_phase_state
from apbsim.safety import SceneState, safe_distance_generalized
from apbsim.sim import (
    AdversarialSpec,
    AebControl,
    ApbControl,
    NoControl,
    Scenario,
    run,
    run_batch,
)


def quiet_params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RssParams(**kw)


class TestJittedPieces:
    def test_refractory_constants_agree(self):
        import apbsim.controllers as controllers

        assert engine.EPISODE_REFRACTORY == controllers.EPISODE_REFRACTORY

    def test_schedule_matches_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            v0 = rng.uniform(0.0, 50.0)
            a0 = rng.uniform(-12.0, 3.0)
            j = rng.uniform(0.5, 10.0)
            a_min = rng.uniform(1.0, 10.0)
            ref = brake_schedule_jerk(
                KinematicState(0.0, v0, float(np.clip(a0, -15.0, 15.0))),
                quiet_params(a_min_brake=a_min, j_max=j))
            big_t, t_stop, v_t, d_jerk, d_total = engine.jb_schedule(v0, a0, j, a_min)
            assert big_t == pytest.approx(ref.t_switch, abs=1e-12)
            assert t_stop == pytest.approx(ref.t_stop, abs=1e-12)
            assert v_t == pytest.approx(ref.v_at_switch, abs=1e-12)
            assert d_total == pytest.approx(ref.d_total, abs=1e-12)

    def test_safe_distance_matches_generalized(self):
        rng = np.random.default_rng(6)
        for _ in range(800):
            a_min = rng.uniform(1.0, 10.0)
            a_max = rng.uniform(1.0, 12.0)  # includes the out-braking regime
            j = rng.uniform(0.5, 10.0)
            v_r = rng.uniform(0.0, 50.0)
            v_f = rng.uniform(0.0, 50.0)
            a_r = rng.uniform(-14.0, 3.0)
            p = quiet_params(a_max_brake=a_max, a_min_brake=a_min, j_max=j)
            a0 = min(0.0, max(a_r, -a_min))
            ref = safe_distance_generalized(
                KinematicState(0.0, v_r, a0), KinematicState(0.0, v_f, 0.0),
                ProfileId.FRONT_MAX_BRAKE, ProfileId.JERK_BOUNDED, p)
            fast = engine.apb_safe_distance(v_r, a_r, v_f, j, a_min, a_max)
            assert fast == pytest.approx(ref, abs=1e-9)

    def test_monitor_margin_matches_reference(self, default_params):
        rng = np.random.default_rng(8)
        p = default_params
        for _ in range(300):
            gap = rng.uniform(-1.0, 80.0)
            v_r = rng.uniform(0.0, 40.0)
            v_f = rng.uniform(0.0, 40.0)
            cmd = rng.uniform(-10.0, 15.0)
            look = rng.choice([0.0, 0.01, 0.1])
            scene = SceneState(KinematicState(0.0, v_r, 0.0),
                               KinematicState(gap, v_f, 0.0), gap)
            ref = apb_monitor_margin(scene, p, cmd, look)
            fast = engine.monitor_margin(gap, v_r, cmd, v_f, look,
                                         p.j_max, p.a_min_brake, p.a_max_brake)
            assert fast == pytest.approx(ref, abs=1e-9)


class TestExactAdvance:
    def test_constant_acceleration(self):
        x, v, a = engine.advance(0.0, 10.0, -2.0, -2.0, 0.0, -2.0, 1.0)
        assert x == pytest.approx(9.0)
        assert v == pytest.approx(8.0)
        assert a == -2.0

    def test_velocity_clamp_inside_step(self):
        # v=1, a=-4: stops at t=0.25 having moved exactly 0.125 m
        x, v, a = engine.advance(0.0, 1.0, -4.0, -4.0, 0.0, -4.0, 0.5)
        assert x == pytest.approx(0.125, abs=1e-15)
        assert v == 0.0
        assert a == 0.0

    def test_stopped_car_stays_put_under_braking(self):
        x, v, a = engine.advance(3.0, 0.0, -4.0, -4.0, 0.0, -4.0, 0.5)
        assert (x, v, a) == (3.0, 0.0, 0.0)

    def test_stopped_car_moves_under_positive_command(self):
        x, v, a = engine.advance(0.0, 0.0, 2.0, 2.0, 0.0, 2.0, 0.5)
        assert x == pytest.approx(0.25)
        assert v == pytest.approx(1.0)

    def test_pure_ramp_matches_jerk_phase(self):
        ref = jerk_phase_state(KinematicState(0.0, 20.0, 0.0), 2.0, 1.5)
        x, v, a = engine.advance(0.0, 20.0, 0.0, 0.0, 2.0, -100.0, 1.5)
        assert x == pytest.approx(ref.x, abs=1e-12)
        assert v == pytest.approx(ref.v, abs=1e-12)
        assert a == pytest.approx(ref.a, abs=1e-12)

    def test_ramp_saturates_at_floor(self):
        # ramp 0 -> -4 over 2 s, then constant -4 for 1 s
        ref = jerk_phase_state(KinematicState(0.0, 20.0, 0.0), 2.0, 2.0)
        x, v, a = engine.advance(0.0, 20.0, 0.0, 0.0, 2.0, -4.0, 3.0)
        assert x == pytest.approx(ref.x + ref.v * 1.0 - 2.0, abs=1e-12)
        assert v == pytest.approx(ref.v - 4.0, abs=1e-12)
        assert a == -4.0

    def test_ceiling_phase_then_ramp(self):
        # command clipped at a_hi=-1 until the ramp passes it at t=0.5
        x1, v1, _ = engine.advance(0.0, 10.0, -1.0, 0.0, 2.0, -4.0, 0.5)
        assert v1 == pytest.approx(10.0 - 1.0 * 0.5)
        x2, v2, a2 = engine.advance(0.0, 10.0, -1.0, 0.0, 2.0, -4.0, 1.0)
        # after 0.5 s the ramp (0 - 2t) is below -1 and takes over
        assert a2 == pytest.approx(-2.0)
        assert v2 < v1

    def test_ramp_stop_position_is_exact(self):
        # from 2 m/s with jerk 4: v = 2 - 2t^2 hits zero at t=1; x = 2 - 4/6...
        x, v, a = engine.advance(0.0, 2.0, 0.0, 0.0, 4.0, -100.0, 2.0)
        assert v == 0.0
        assert x == pytest.approx(2.0 * 1.0 - 4.0 / 6.0, abs=1e-12)
        assert a == 0.0


class TestStepPair:
    def _dense_min_gap(self, gap0, vr, r_hi, r_r0, r_j, r_lo, vf, af, dt):
        taus = np.linspace(0.0, dt, 20001)
        gaps = np.array([
            engine._gap_at(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, af, float(s))
            for s in taus
        ])
        return float(gaps.min())

    def test_min_gap_matches_dense_sampling(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            gap0 = rng.uniform(0.0, 0.6)
            vr = rng.uniform(0.0, 30.0)
            vf = rng.uniform(0.0, 30.0)
            a_d = rng.uniform(-6.0, 6.0)
            r_r0 = rng.uniform(-6.0, 2.0)
            r_j = rng.choice([0.0, 2.0, 6.0])
            if r_j == 0.0:
                r_hi = r_lo = r_r0
            else:
                r_hi, r_lo = max(a_d, r_r0), -8.0
            af = rng.uniform(-8.0, 2.0)
            out = engine.step_pair(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, af, 0.01)
            min_gap = out[6]
            dense = self._dense_min_gap(gap0, vr, r_hi, r_r0, r_j, r_lo, vf, af, 0.01)
            assert min_gap <= dense + 1e-12
            assert min_gap == pytest.approx(dense, abs=1e-6)

    def test_collision_time_bisected(self):
        # closing at a constant 2 m/s from 1 cm: contact at exactly 5 ms
        out = engine.step_pair(0.01, 12.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.01)
        t_coll = out[7]
        assert t_coll == pytest.approx(0.005, abs=1e-9)

    def test_far_apart_fast_path_keeps_endpoints(self):
        out = engine.step_pair(50.0, 20.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.01)
        dxr, _, _, dxf, _, _, min_gap, t_coll = out
        assert t_coll == -1.0
        assert min_gap == pytest.approx(50.0 + dxf - dxr)


def _random_scenarios(n, seed, horizon=8.0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        p = RssParams()
        v_r = rng.uniform(0.0, 38.0)
        v_f = rng.uniform(0.0, 38.0)
        d = engine.apb_safe_distance(v_r, 0.0, v_f, p.j_max, p.a_min_brake, p.a_max_brake)
        gap = d + rng.uniform(-2.0, 30.0)  # some start dangerous on purpose
        gap = max(gap, 0.5)
        driver = [ConstantSpeed(), Tailgater(), DistractedFollower()][int(rng.integers(0, 3))]
        controller = [NoControl(), ApbControl(), AebControl(AebConfig())][int(rng.integers(0, 3))]
        out.append(Scenario(
            params=p,
            initial=SceneState(KinematicState(0.0, v_r, 0.0),
                               KinematicState(gap, v_f, 0.0), gap),
            adversarial=AdversarialSpec(seed=int(rng.integers(0, 2 ** 31)), compliant=True),
            driver=driver,
            controller=controller,
            dt=0.01,
            horizon=horizon,
            seed=int(rng.integers(0, 2 ** 31)),
        ))
    return out


class TestBatchAgainstReference:
    def test_outcomes_match_reference_simulator(self):
        scenarios = _random_scenarios(120, seed=99)
        res = run_batch(scenarios)
        for i, sc in enumerate(scenarios):
            tr = run(sc)
            assert tr.collided == (res.status[i] == engine.STATUS_COLLISION), i
            assert tr.min_gap == pytest.approx(res.min_gap[i], abs=1e-9), i
            assert tr.final_gap == pytest.approx(res.final_gap[i], abs=1e-9), i
            if tr.collided:
                assert tr.collision_time == pytest.approx(res.coll_t[i], abs=1e-9), i
            n_onsets = sum(1 for e in tr.events if e.kind == "danger_onset")
            n_starts = sum(1 for e in tr.events if e.kind == "intervention_start")
            assert n_onsets == res.n_eps[i], i
            assert n_starts == res.n_int[i], i

    def test_command_stats_match_reference(self):
        scenarios = [sc for sc in _random_scenarios(60, seed=101)
                     if not isinstance(sc.controller, NoControl)]
        res = run_batch(scenarios)
        for i, sc in enumerate(scenarios):
            tr = run(sc)
            active = tr.mode == 1
            if active.any():
                assert float((-tr.cmd_accel[active]).max()) == pytest.approx(
                    res.max_dec[i], abs=1e-9), i
            steps_in = active[1:]
            if steps_in.any():
                ref_jerk = float(np.abs(tr.cmd_accel[1:][steps_in]
                                        - tr.cmd_accel[:-1][steps_in]).max())
                assert ref_jerk == pytest.approx(res.max_jerk_step[i], abs=1e-9), i
